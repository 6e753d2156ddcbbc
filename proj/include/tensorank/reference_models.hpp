#pragma once

// Builders for the standard worked-example supports and random weakly
// hierarchical models. Levels here are 0-based: level 1 is the first
// non-baseline level.

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "tensorank/graph.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/random.hpp"

namespace tensorank {

/// A nonzero coefficient with magnitude in [lo, hi] and random sign.
inline double nonzero_coefficient(Rng& rng, double lo = 0.3, double hi = 1.0) {
  double mag = lo + (hi - lo) * uniform01(rng);
  return uniform01(rng) < 0.5 ? -mag : mag;
}

namespace detail {

inline void put(LogLinearModel& m, std::vector<std::pair<Var, Level>> kv, Rng& rng) {
  auto key = InteractionKey::make(std::move(kv));
  if (!m.contains(key)) m.set(key, nonzero_coefficient(rng));
}

/// Adds every main effect at the levels that appear in stored interactions,
/// so the support becomes weakly hierarchical.
inline void close_downward(LogLinearModel& m, Rng& rng) {
  std::vector<InteractionKey> keys;
  for (const auto& [k, v] : m.terms()) keys.push_back(k);
  for (const auto& k : keys) {
    const std::size_t n = k.order();
    for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
      auto sub = k.sub(mask);
      if (!m.contains(sub)) m.set(sub, nonzero_coefficient(rng));
    }
  }
}

inline void normalize_theta0(LogLinearModel& m) { m.set_theta0(tensor_from_loglinear(m).theta0); }

}  // namespace detail

/// p = 2: level 1 of each variable interacts with every non-baseline level
/// of the other. With main effects the model is weakly hierarchical.
inline LogLinearModel example_cross_model(int d, Rng& rng, bool main_effects = true) {
  require(d >= 2, ErrorKind::input, "need d >= 2");
  LogLinearModel m(VariableScheme(2, d));
  for (Level c = 1; c < d; ++c) {
    detail::put(m, {{0, 1}, {1, c}}, rng);
    detail::put(m, {{0, c}, {1, 1}}, rng);
  }
  if (main_effects) detail::close_downward(m, rng);
  detail::normalize_theta0(m);
  return m;
}

/// p = 3: theta_12(1, c), theta_23(1, c), theta_13(c, 2) for c >= 1. The
/// last family sits at level 2, so binary variables use level 1 there.
inline LogLinearModel example_three_way_model(int d, Rng& rng, bool main_effects = true) {
  require(d >= 2, ErrorKind::input, "need d >= 2");
  const Level third = std::min(2, d - 1);
  LogLinearModel m(VariableScheme(3, d));
  for (Level c = 1; c < d; ++c) {
    detail::put(m, {{0, 1}, {1, c}}, rng);
    detail::put(m, {{1, 1}, {2, c}}, rng);
    detail::put(m, {{0, c}, {2, third}}, rng);
  }
  if (main_effects) detail::close_downward(m, rng);
  detail::normalize_theta0(m);
  return m;
}

/// p = 5 support with two three-way terms. Needs d >= 4 (level 3 appears).
inline LogLinearModel example_five_variable_model(int d, Rng& rng, bool main_effects = true) {
  require(d >= 4, ErrorKind::input, "the five-variable example needs d >= 4");
  LogLinearModel m(VariableScheme(5, d));
  for (Level c = 1; c < d; ++c) {
    detail::put(m, {{0, 1}, {1, c}}, rng);  // 12
    detail::put(m, {{1, 1}, {2, c}}, rng);  // 23
    detail::put(m, {{2, 1}, {3, c}}, rng);  // 34
    detail::put(m, {{3, 1}, {4, c}}, rng);  // 45
    detail::put(m, {{0, c}, {4, 1}}, rng);  // 15, level 2 of variable 5
    detail::put(m, {{1, 1}, {3, c}}, rng);  // 24
    detail::put(m, {{0, 1}, {3, c}}, rng);  // 14
    detail::put(m, {{1, 1}, {4, c}}, rng);  // 25
    detail::put(m, {{0, 1}, {4, c}}, rng);  // 15, level 2 of variable 1
  }
  detail::put(m, {{0, 1}, {1, 1}, {3, 3}}, rng);  // 124
  detail::put(m, {{0, 1}, {1, 1}, {4, 3}}, rng);  // 125
  if (main_effects) detail::close_downward(m, rng);
  detail::normalize_theta0(m);
  return m;
}

/// Every coefficient of every subset nonzero.
inline LogLinearModel saturated_model(const VariableScheme& scheme, Rng& rng) {
  LogLinearModel m(scheme);
  std::vector<Var> all;
  for (Var j = 0; j < scheme.p(); ++j) all.push_back(j);
  Graph complete(scheme.p());
  for (Var a = 0; a < scheme.p(); ++a)
    for (Var b = a + 1; b < scheme.p(); ++b) complete.add_edge(a, b);
  for (const auto& vars : complete.complete_subsets())
    for (const auto& key : keys_on(scheme, vars)) m.set(key, nonzero_coefficient(rng));
  detail::normalize_theta0(m);
  return m;
}

struct RandomModelConfig {
  int max_p = 4;
  int max_d = 4;
  double pair_prob = 0.35;     // chance a two-way key is present
  double triple_prob = 0.5;    // chance an admissible three-way key is present
  double coef_sd = 1.0;
};

/// Random weakly hierarchical model: random two-way keys, three-way keys
/// only where all their two-way faces exist, then all lower faces filled.
inline LogLinearModel random_weakly_hierarchical(Rng& rng, const RandomModelConfig& cfg = {}) {
  int p = 2 + static_cast<int>(uniform01(rng) * (cfg.max_p - 1));
  p = std::min(p, cfg.max_p);
  std::vector<int> levels(static_cast<std::size_t>(p));
  for (auto& d : levels) d = std::min(cfg.max_d, 2 + static_cast<int>(uniform01(rng) * (cfg.max_d - 1)));
  VariableScheme scheme(levels);
  LogLinearModel m(scheme);
  auto coef = [&] {
    double v = 0.0;
    while (std::abs(v) < 0.05) v = normal(rng, 0.0, cfg.coef_sd);
    return v;
  };
  for (Var a = 0; a < p; ++a)
    for (Var b = a + 1; b < p; ++b)
      for (const auto& k : keys_on(scheme, {a, b}))
        if (uniform01(rng) < cfg.pair_prob) m.set(k, coef());
  for (Var a = 0; a < p; ++a)
    for (Var b = a + 1; b < p; ++b)
      for (Var c = b + 1; c < p; ++c)
        for (const auto& k : keys_on(scheme, {a, b, c})) {
          bool faces = m.contains(k.sub(3)) && m.contains(k.sub(5)) && m.contains(k.sub(6));
          if (faces && uniform01(rng) < cfg.triple_prob) m.set(k, coef());
        }
  std::vector<InteractionKey> keys;
  for (const auto& [k, v] : m.terms()) keys.push_back(k);
  for (const auto& k : keys)
    for (std::size_t t = 0; t < k.order(); ++t) {
      InteractionKey main{{k.vars[t]}, {k.levels[t]}};
      if (!m.contains(main)) m.set(main, coef());
    }
  // Some extra main effects on non-interacting levels.
  for (Var j = 0; j < p; ++j)
    for (Level c = 1; c < levels[static_cast<std::size_t>(j)]; ++c) {
      InteractionKey main{{j}, {c}};
      if (!m.contains(main) && uniform01(rng) < 0.5) m.set(main, coef());
    }
  detail::normalize_theta0(m);
  return m;
}

/// Graphs of the standard figure (0-based vertices).
inline Graph figure_graph(int which) {
  auto clique = [](Graph& g, std::vector<Var> vs) {
    for (std::size_t a = 0; a < vs.size(); ++a)
      for (std::size_t b = a + 1; b < vs.size(); ++b) g.add_edge(vs[a], vs[b]);
  };
  switch (which) {
    case 1: {
      Graph g(7);
      for (Var v = 0; v < 6; ++v) g.add_edge(v, 6);
      return g;
    }
    case 2: {
      Graph g(7);
      clique(g, {0, 1, 2, 3});
      return g;
    }
    case 3: {
      Graph g(7);
      clique(g, {0, 1, 2, 3});
      clique(g, {4, 5, 6});
      return g;
    }
    case 4: {
      Graph g(7);
      clique(g, {0, 1, 2, 3});
      clique(g, {4, 5, 6});
      g.add_edge(3, 4);
      return g;
    }
    case 5: {
      Graph g(8);
      clique(g, {0, 1, 2, 3});
      clique(g, {3, 4, 5});
      clique(g, {4, 5, 6, 7});
      return g;
    }
    default:
      fail(ErrorKind::input, "figure graphs are numbered 1 to 5");
  }
}

}  // namespace tensorank
