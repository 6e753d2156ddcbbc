#pragma once

// Corner-parametrized log-linear models:
//
//   log pi_i = theta_0 + sum_{E nonempty} theta_E(i_E),
//
// where theta_E(i_E) = 0 whenever some level in i_E is the baseline level 0.
// A model stores only its nonzero coefficients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/graph.hpp"
#include "tensorank/random.hpp"
#include "tensorank/scheme.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

/// (E, i_E): a sorted nonempty variable subset with one non-baseline level
/// per member.
struct InteractionKey {
  std::vector<Var> vars;
  std::vector<Level> levels;

  std::size_t order() const { return vars.size(); }

  /// Canonical key from unsorted (variable, level) pairs.
  static InteractionKey make(std::vector<std::pair<Var, Level>> pairs) {
    std::sort(pairs.begin(), pairs.end());
    InteractionKey k;
    for (auto [v, l] : pairs) {
      k.vars.push_back(v);
      k.levels.push_back(l);
    }
    return k;
  }

  /// Sub-key on the members selected by `mask` (bit t selects vars[t]).
  InteractionKey sub(std::uint64_t mask) const {
    InteractionKey k;
    for (std::size_t t = 0; t < vars.size(); ++t)
      if (mask >> t & 1U) {
        k.vars.push_back(vars[t]);
        k.levels.push_back(levels[t]);
      }
    return k;
  }

  Level level_of(Var v) const {
    for (std::size_t t = 0; t < vars.size(); ++t)
      if (vars[t] == v) return levels[t];
    return -1;
  }

  /// Order first, then variables, then levels.
  friend bool operator<(const InteractionKey& a, const InteractionKey& b) {
    if (a.vars.size() != b.vars.size()) return a.vars.size() < b.vars.size();
    if (a.vars != b.vars) return a.vars < b.vars;
    return a.levels < b.levels;
  }
  friend bool operator==(const InteractionKey& a, const InteractionKey& b) {
    return a.vars == b.vars && a.levels == b.levels;
  }
};

class LogLinearModel {
 public:
  LogLinearModel() = default;
  explicit LogLinearModel(VariableScheme scheme, double theta0 = 0.0)
      : scheme_(std::move(scheme)), theta0_(theta0) {}

  const VariableScheme& scheme() const { return scheme_; }
  double theta0() const { return theta0_; }
  void set_theta0(double t) { theta0_ = t; }

  /// Stores a coefficient; a zero value removes the key.
  void set(const InteractionKey& key, double value) {
    validate(key);
    require(std::isfinite(value), ErrorKind::input, "coefficients must be finite");
    if (value == 0.0) {
      terms_.erase(key);
    } else {
      terms_[key] = value;
    }
  }

  /// Adds a coefficient that must not already be present.
  void insert_new(const InteractionKey& key, double value) {
    validate(key);
    require(terms_.count(key) == 0, ErrorKind::input, "duplicate interaction key");
    set(key, value);
  }

  double get(const InteractionKey& key) const {
    auto it = terms_.find(key);
    return it == terms_.end() ? 0.0 : it->second;
  }

  bool contains(const InteractionKey& key) const { return terms_.count(key) > 0; }

  const std::map<InteractionKey, double>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  void validate(const InteractionKey& key) const {
    require(!key.vars.empty(), ErrorKind::input, "interaction key needs a nonempty variable set");
    require(key.vars.size() == key.levels.size(), ErrorKind::input, "key variables and levels differ in length");
    for (std::size_t t = 0; t < key.vars.size(); ++t) {
      Var v = key.vars[t];
      require(v >= 0 && v < scheme_.p(), ErrorKind::input, "key variable out of range");
      if (t > 0) require(key.vars[t - 1] < v, ErrorKind::input, "key variables must be sorted and distinct");
      Level l = key.levels[t];
      require(l >= 1 && l < scheme_.levels(v), ErrorKind::input,
              "key level out of range or at the corner baseline");
    }
  }

 private:
  VariableScheme scheme_;
  double theta0_ = 0.0;
  std::map<InteractionKey, double> terms_;
};

/// Options for hierarchy checks. `ignore_main_effects` skips |E| = 1 sub-keys
/// when looking for violations (models written with zero main effects).
struct HierarchyOptions {
  bool ignore_main_effects = false;
};

/// Every stored key's sub-keys (same levels on the subset) are stored too.
inline bool is_weakly_hierarchical(const LogLinearModel& model, HierarchyOptions opt = {}) {
  for (const auto& [key, value] : model.terms()) {
    const std::size_t n = key.order();
    if (n < 2) continue;
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      if (opt.ignore_main_effects && std::popcount(mask) == 1) continue;
      if (!model.contains(key.sub(mask))) return false;
    }
  }
  return true;
}

/// Whenever theta_E is identically zero, so is theta_F for every F above E.
inline bool is_hierarchical(const LogLinearModel& model, HierarchyOptions opt = {}) {
  std::set<std::vector<Var>> present;
  for (const auto& [key, value] : model.terms()) present.insert(key.vars);
  for (const auto& vars : present) {
    const std::size_t n = vars.size();
    if (n < 2) continue;
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask) {
      if (opt.ignore_main_effects && std::popcount(mask) == 1) continue;
      std::vector<Var> sub;
      for (std::size_t t = 0; t < n; ++t)
        if (mask >> t & 1U) sub.push_back(vars[t]);
      if (!present.count(sub)) return false;
    }
  }
  return true;
}

struct SupportSummary {
  std::vector<InteractionKey> interactions;  // C_theta: |E| >= 2
  std::vector<InteractionKey> two_way;       // C_theta,2
  std::vector<std::vector<Level>> interacting_levels;  // C_theta^(j), sorted
  std::vector<Var> independent;              // U: empty C_theta^(j)
  std::vector<Var> active;                   // V* = V \ U
  bool two_way_sufficient = false;           // C^(j) taken from two-way terms
};

/// Extracts the interaction support. For weakly hierarchical models the
/// interacting levels come from the two-way terms alone.
inline SupportSummary support_summary(const LogLinearModel& model, HierarchyOptions opt = {}) {
  SupportSummary s;
  const int p = model.scheme().p();
  std::vector<std::set<Level>> levels(static_cast<std::size_t>(p));
  s.two_way_sufficient = is_weakly_hierarchical(model, opt);
  for (const auto& [key, value] : model.terms()) {
    if (key.order() < 2) continue;
    s.interactions.push_back(key);
    if (key.order() == 2) s.two_way.push_back(key);
    if (key.order() == 2 || !s.two_way_sufficient)
      for (std::size_t t = 0; t < key.order(); ++t)
        levels[static_cast<std::size_t>(key.vars[t])].insert(key.levels[t]);
  }
  s.interacting_levels.resize(static_cast<std::size_t>(p));
  for (Var j = 0; j < p; ++j) {
    auto& src = levels[static_cast<std::size_t>(j)];
    s.interacting_levels[static_cast<std::size_t>(j)].assign(src.begin(), src.end());
    (src.empty() ? s.independent : s.active).push_back(j);
  }
  return s;
}

namespace detail {

/// sum_E theta_E(i_E) per cell, excluding theta_0.
inline std::vector<double> interaction_log_weights(const LogLinearModel& model) {
  const VariableScheme& scheme = model.scheme();
  std::vector<double> logw(scheme.cells(), 0.0);
  ProductEvent slice(static_cast<std::size_t>(scheme.p()));
  for (const auto& [key, value] : model.terms()) {
    for (Var j = 0; j < scheme.p(); ++j) {
      Level l = key.level_of(j);
      slice[static_cast<std::size_t>(j)] = l >= 0 ? std::vector<Level>{l} : all_levels(scheme.levels(j));
    }
    const double v = value;
    for_each_cell_in(scheme, slice, [&](std::span<const Level>, std::size_t flat) { logw[flat] += v; });
  }
  return logw;
}

}  // namespace detail

struct NormalizedTensor {
  ProbabilityTensor pi;
  double theta0 = 0.0;  // normalizing constant actually used
};

/// Evaluates the model with theta_0 recomputed so the cells sum to one.
inline NormalizedTensor tensor_from_loglinear(const LogLinearModel& model) {
  std::vector<double> logw = detail::interaction_log_weights(model);
  double mx = *std::max_element(logw.begin(), logw.end());
  require(std::isfinite(mx), ErrorKind::numeric, "log-linear evaluation is not finite");
  std::vector<double> w(logw.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - mx);
  double total = stable_sum(w);
  double theta0 = -(mx + std::log(total));
  return {ProbabilityTensor::normalized(NonnegTensor(model.scheme(), std::move(w))), theta0};
}

/// Evaluates exp(theta_0 + sum theta_E) with the stored theta_0, no
/// renormalization.
inline NonnegTensor unnormalized_tensor(const LogLinearModel& model) {
  std::vector<double> logw = detail::interaction_log_weights(model);
  for (double& x : logw) {
    x = std::exp(x + model.theta0());
    require(std::isfinite(x), ErrorKind::numeric, "exp overflow: parameter magnitude too large for this scheme");
  }
  return NonnegTensor(model.scheme(), std::move(logw));
}

/// Corner-parametrized inversion by inclusion-exclusion over corner cells:
///
///   theta_E(i_E) = sum_{F subset E} (-1)^{|E \ F|} log pi(i on F, baseline elsewhere),
///
/// computed as a per-variable differencing pass (Moebius inversion on the
/// subset lattice). Coefficients with |theta| <= prune_below are dropped;
/// the default keeps every nonzero value.
/// Dense form: entry at cell i is theta_E(i_E) with E the non-baseline
/// coordinates of i (entry 0 is theta_0).
inline std::vector<double> corner_coefficients(const NonnegTensor& pi) {
  const Shape& shape = pi.shape();
  std::vector<double> t(pi.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    require(pi[i] > 0.0, ErrorKind::numeric, "log-linear inversion needs strictly positive cells");
    t[i] = std::log(pi[i]);
  }
  for (Var j = 0; j < shape.p(); ++j) {
    const std::size_t stride = shape.stride(j);
    const std::size_t d = static_cast<std::size_t>(shape.levels(j));
    for (std::size_t idx = 0; idx < t.size(); ++idx) {
      std::size_t digit = (idx / stride) % d;
      if (digit != 0) t[idx] -= t[idx - digit * stride];
    }
  }
  return t;
}

inline LogLinearModel theta_from_tensor(const NonnegTensor& pi, double prune_below = 0.0) {
  const Shape& shape = pi.shape();
  VariableScheme scheme = VariableScheme::from_shape(shape);
  std::vector<double> t = corner_coefficients(pi);
  LogLinearModel model(scheme, t[0]);
  for (CellCursor c(shape); !c.done(); c.next()) {
    if (c.flat() == 0) continue;
    double v = t[c.flat()];
    if (std::abs(v) <= prune_below || v == 0.0) continue;
    std::vector<std::pair<Var, Level>> pairs;
    for (Var j = 0; j < shape.p(); ++j)
      if (c[j] != 0) pairs.emplace_back(j, c[j]);
    model.set(InteractionKey::make(std::move(pairs)), v);
  }
  return model;
}

/// Every key on the given variable subset: all non-baseline level tuples.
inline std::vector<InteractionKey> keys_on(const VariableScheme& scheme, const std::vector<Var>& vars) {
  std::vector<InteractionKey> out;
  std::vector<std::vector<Level>> sets;
  std::vector<int> dims;
  for (Var v : vars) dims.push_back(scheme.levels(v) - 1);
  Shape sub(dims);
  for (CellCursor c(sub); !c.done(); c.next()) {
    InteractionKey k;
    k.vars = vars;
    for (Level l : c.cell()) k.levels.push_back(l + 1);
    out.push_back(std::move(k));
  }
  return out;
}

/// Random hierarchical model generated by a graph: the support is every key
/// whose variable set lies inside a clique, each coefficient drawn iid
/// Normal(0, sigma2); theta_0 normalizes the tensor.
inline LogLinearModel random_model_from_graph(const VariableScheme& scheme, const Graph& graph, double sigma2, Rng& rng) {
  require(graph.p() == scheme.p(), ErrorKind::input, "graph and scheme disagree on the number of variables");
  require(sigma2 >= 0.0, ErrorKind::input, "variance must be nonnegative");
  LogLinearModel model(scheme);
  const double sd = std::sqrt(sigma2);
  if (sd > 0.0)
    for (const auto& vars : graph.complete_subsets())
      for (const auto& key : keys_on(scheme, vars)) {
        double v = 0.0;
        while (v == 0.0) v = normal(rng, 0.0, sd);
        model.set(key, v);
      }
  model.set_theta0(tensor_from_loglinear(model).theta0);
  return model;
}

}  // namespace tensorank
