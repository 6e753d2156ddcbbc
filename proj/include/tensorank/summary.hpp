#pragma once

// Posterior summaries of a c-Tucker trace: core-rank probability, group
// configurations, pairwise Cramer's V and log-linear coefficients of the
// implied tensor.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tensorank/chain.hpp"
#include "tensorank/error.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

struct CramersV {
  double value = 0.0;
  bool zero_margin = false;  // some level had zero mass and was skipped
};

/// Population Cramer's V of the (a, b) marginal: sqrt(phi^2 / (min(d) - 1)),
/// phi^2 = sum (pi_xy - pi_x pi_y)^2 / (pi_x pi_y) over positive-mass levels.
inline CramersV cramers_v(const ProbabilityTensor& pi, Var a, Var b) {
  require(a != b, ErrorKind::input, "Cramer's V needs two distinct variables");
  const Shape& sh = pi.shape();
  require(a >= 0 && b >= 0 && a < sh.p() && b < sh.p(), ErrorKind::input, "variable out of range");
  const int da = sh.levels(a), db = sh.levels(b);
  std::vector<double> joint(static_cast<std::size_t>(da * db), 0.0), ma(static_cast<std::size_t>(da), 0.0), mb(static_cast<std::size_t>(db), 0.0);
  for (CellCursor c(sh); !c.done(); c.next()) {
    double v = pi[c.flat()];
    joint[static_cast<std::size_t>(c[a] * db + c[b])] += v;
    ma[static_cast<std::size_t>(c[a])] += v;
    mb[static_cast<std::size_t>(c[b])] += v;
  }
  CramersV out;
  int ra = 0, rb = 0;
  for (double x : ma) ra += x > 0.0;
  for (double x : mb) rb += x > 0.0;
  out.zero_margin = ra < da || rb < db;
  double phi2 = 0.0;
  for (int x = 0; x < da; ++x)
    for (int y = 0; y < db; ++y) {
      double e = ma[static_cast<std::size_t>(x)] * mb[static_cast<std::size_t>(y)];
      if (e <= 0.0) continue;
      double dlt = joint[static_cast<std::size_t>(x * db + y)] - e;
      phi2 += dlt * dlt / e;
    }
  int q = std::min(ra, rb) - 1;
  out.value = q > 0 ? std::min(1.0, std::sqrt(phi2 / q)) : 0.0;
  return out;
}

/// pi_y = sum_l nu_l prod_s [ sum_h psi^(s)_{lh} prod_{j in s} lambda^(j)_{h, y_j} ].
inline ProbabilityTensor implied_tensor(const Snapshot& s, const VariableScheme& scheme) {
  const int p = scheme.p();
  const int k = static_cast<int>(s.nu.size());
  const int m = static_cast<int>(s.lambda[0].size());
  std::vector<std::vector<Var>> members(static_cast<std::size_t>(k));
  for (Var j = 0; j < p; ++j) members[static_cast<std::size_t>(s.groups[static_cast<std::size_t>(j)])].push_back(j);
  std::vector<double> out(scheme.cells(), 0.0);
  for (CellCursor c(scheme); !c.done(); c.next()) {
    double total = 0.0;
    for (int l = 0; l < k; ++l) {
      double term = s.nu[static_cast<std::size_t>(l)];
      for (int g = 0; g < k && term > 0.0; ++g) {
        if (members[static_cast<std::size_t>(g)].empty()) continue;
        const Vec& psi = s.psi[static_cast<std::size_t>(g)][static_cast<std::size_t>(l)];
        double inner = 0.0;
        for (int h = 0; h < m; ++h) {
          double v = psi[static_cast<std::size_t>(h)];
          for (Var j : members[static_cast<std::size_t>(g)]) v *= s.lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(h)][static_cast<std::size_t>(c[j])];
          inner += v;
        }
        term *= inner;
      }
      total += term;
    }
    out[c.flat()] = total;
  }
  return ProbabilityTensor::normalized(NonnegTensor(scheme, std::move(out)));
}

/// Group labels relabelled so groups appear in order of their smallest member.
inline std::vector<int> canonical_groups(const std::vector<int>& g) {
  std::map<int, int> relabel;
  std::vector<int> out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto it = relabel.emplace(g[j], static_cast<int>(relabel.size())).first;
    out[j] = it->second;
  }
  return out;
}

inline int occupied_groups(const std::vector<int>& g) {
  std::vector<int> s = g;
  std::sort(s.begin(), s.end());
  return static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
}

/// Type-7 sample quantile.
inline double quantile(std::vector<double> xs, double q) {
  require(!xs.empty(), ErrorKind::input, "quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  double h = (static_cast<double>(xs.size()) - 1.0) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct Interval {
  double mean = 0.0, lower = 0.0, upper = 0.0;
};

struct GroupConfig {
  std::vector<int> labels;  // canonical
  double probability = 0.0;
};

struct SummaryOptions {
  double v_threshold = 0.1;
  double interval_mass = 0.95;
  double occupancy_fraction = 0.005;
  int occupancy_min = 2;
  std::size_t top_configs = 10;
  int max_theta_order = 2;   // orders of coefficients to keep per snapshot
};

struct PosteriorSummary {
  std::size_t snapshots = 0;
  double core_rank_prob = 0.0;
  std::vector<GroupConfig> group_configs;
  std::vector<double> occupied_group_prob;         // [g]: Pr(exactly g groups used), g = 0..k
  std::vector<std::vector<double>> cramers_v_mean;
  std::vector<std::vector<double>> cramers_v_exceed;
  std::map<InteractionKey, std::vector<double>> theta_samples;  // zero when a key is absent from a draw
  std::map<InteractionKey, Interval> theta_intervals;
};

/// Observations needed for a core component to count as occupied.
inline int occupancy_threshold(int n, const SummaryOptions& opt) {
  return std::max(opt.occupancy_min, static_cast<int>(std::ceil(opt.occupancy_fraction * n)));
}

inline PosteriorSummary posterior_summary(const ChainTrace& trace, const VariableScheme& scheme, const SummaryOptions& opt = {}) {
  require(!trace.snapshots.empty(), ErrorKind::input, "posterior summary needs a nonempty trace");
  const int p = scheme.p();
  PosteriorSummary out;
  out.snapshots = trace.snapshots.size();
  const double N = static_cast<double>(out.snapshots);
  const int occ = occupancy_threshold(trace.n, opt);
  out.cramers_v_mean.assign(static_cast<std::size_t>(p), std::vector<double>(static_cast<std::size_t>(p), 0.0));
  out.cramers_v_exceed = out.cramers_v_mean;
  std::map<std::vector<int>, double> configs;
  const int k = static_cast<int>(trace.snapshots[0].nu.size());
  out.occupied_group_prob.assign(static_cast<std::size_t>(k + 1), 0.0);

  // Every key up to the requested order, so absent draws count as zero.
  std::vector<InteractionKey> keys;
  {
    Graph complete(p);
    for (Var a = 0; a < p; ++a)
      for (Var b = a + 1; b < p; ++b) complete.add_edge(a, b);
    for (const auto& vars : complete.complete_subsets())
      if (static_cast<int>(vars.size()) <= opt.max_theta_order)
        for (auto& key : keys_on(scheme, vars)) keys.push_back(std::move(key));
  }
  for (const auto& key : keys) out.theta_samples[key].reserve(out.snapshots);

  for (const auto& s : trace.snapshots) {
    require(static_cast<int>(s.lambda.size()) == p, ErrorKind::input, "trace and scheme disagree on the number of variables");
    int used = 0;
    for (int c : s.w_counts) used += c >= occ;
    if (used > 1) out.core_rank_prob += 1.0;
    configs[canonical_groups(s.groups)] += 1.0;
    out.occupied_group_prob[static_cast<std::size_t>(occupied_groups(s.groups))] += 1.0;

    ProbabilityTensor pi = implied_tensor(s, scheme);
    for (Var a = 0; a < p; ++a)
      for (Var b = a + 1; b < p; ++b) {
        double v = cramers_v(pi, a, b).value;
        out.cramers_v_mean[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += v;
        if (v > opt.v_threshold) out.cramers_v_exceed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += 1.0;
      }
    if (pi.strictly_positive()) {
      LogLinearModel th = theta_from_tensor(pi);
      for (const auto& key : keys) out.theta_samples[key].push_back(th.get(key));
    } else {
      for (const auto& key : keys) out.theta_samples[key].push_back(std::nan(""));
    }
  }
  out.core_rank_prob /= N;
  for (auto& x : out.occupied_group_prob) x /= N;
  for (Var a = 0; a < p; ++a)
    for (Var b = a + 1; b < p; ++b) {
      auto& mv = out.cramers_v_mean[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      auto& ev = out.cramers_v_exceed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
      mv /= N;
      ev /= N;
      out.cramers_v_mean[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = mv;
      out.cramers_v_exceed[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = ev;
    }
  std::vector<std::pair<std::vector<int>, double>> ranked(configs.begin(), configs.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  for (std::size_t i = 0; i < ranked.size() && i < opt.top_configs; ++i) out.group_configs.push_back({ranked[i].first, ranked[i].second / N});

  const double tail = (1.0 - opt.interval_mass) / 2.0;
  for (const auto& [key, xs] : out.theta_samples) {
    std::vector<double> finite;
    for (double x : xs)
      if (std::isfinite(x)) finite.push_back(x);
    if (finite.empty()) continue;
    Interval iv;
    for (double x : finite) iv.mean += x;
    iv.mean /= static_cast<double>(finite.size());
    iv.lower = quantile(finite, tail);
    iv.upper = quantile(finite, 1.0 - tail);
    out.theta_intervals[key] = iv;
  }
  return out;
}

}  // namespace tensorank
