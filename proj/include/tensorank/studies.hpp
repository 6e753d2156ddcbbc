#pragma once

// Monte Carlo studies: priors induced on log-linear coefficients by the
// PARAFAC prior, simulated data sets from graphical log-linear models, and
// interval coverage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tensorank/ctucker.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/graph.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/random.hpp"
#include "tensorank/summary.hpp"

namespace tensorank {

struct PriorStudyConfig {
  int p = 3;
  int d = 20;
  int m = 5;
  ArmSchedule schedule = ArmSchedule::decreasing;
  long n_draws = 10000;
  double beta = 1.0;   // stick concentration for the weights
};

struct PriorDraw {
  std::vector<double> representative;  // [order-1]: first key of that order
  std::vector<double> l1;              // [order-1]: sum of |theta| over that order
};

struct PriorStudyResult {
  PriorStudyConfig config;
  std::vector<InteractionKey> representative_keys;
  std::vector<PriorDraw> draws;

  std::vector<double> column_l1(int order) const {
    std::vector<double> v;
    for (const auto& d : draws) v.push_back(d.l1[static_cast<std::size_t>(order - 1)]);
    return v;
  }
  std::vector<double> column_representative(int order) const {
    std::vector<double> v;
    for (const auto& d : draws) v.push_back(d.representative[static_cast<std::size_t>(order - 1)]);
    return v;
  }
};

/// A PARAFAC tensor drawn from the prior: stick-breaking weights truncated
/// at m, arm h of every variable from Dirichlet(a_h, ..., a_h).
inline ParafacExpansion draw_prior_parafac(const VariableScheme& scheme, int m, ArmSchedule sched, double beta, Rng& rng) {
  Vec sticks(static_cast<std::size_t>(m), 1.0);
  for (int h = 0; h + 1 < m; ++h) sticks[static_cast<std::size_t>(h)] = beta_variate(rng, 1.0, beta);
  Vec weights = stick_weights(sticks);
  double total = stable_sum(weights);
  for (double& x : weights) x /= total;
  std::vector<std::vector<Vec>> arms(static_cast<std::size_t>(m));
  for (int h = 0; h < m; ++h)
    for (Var j = 0; j < scheme.p(); ++j) {
      int d = scheme.levels(j);
      arms[static_cast<std::size_t>(h)].push_back(dirichlet(rng, Vec(static_cast<std::size_t>(d), arm_concentration(sched, h, d))));
    }
  return ParafacExpansion(scheme, std::move(weights), std::move(arms));
}

inline PriorStudyResult induced_prior_study(const PriorStudyConfig& cfg, std::uint64_t seed) {
  require(cfg.n_draws >= 1, ErrorKind::usage, "the prior study needs at least one draw");
  require(cfg.p >= 1 && cfg.d >= 2 && cfg.m >= 1, ErrorKind::usage, "prior study needs p >= 1, d >= 2, m >= 1");
  VariableScheme scheme(cfg.p, cfg.d);
  PriorStudyResult res;
  res.config = cfg;
  for (int r = 1; r <= cfg.p; ++r) {
    InteractionKey key;
    for (Var j = 0; j < r; ++j) {
      key.vars.push_back(j);
      key.levels.push_back(1);
    }
    res.representative_keys.push_back(key);
  }
  // Interaction order of every cell, and the cell holding each representative.
  std::vector<int> order(scheme.cells(), 0);
  for (CellCursor c(scheme); !c.done(); c.next())
    for (Var j = 0; j < scheme.p(); ++j) order[c.flat()] += c[j] != 0;
  std::vector<std::size_t> rep_cell;
  for (const auto& key : res.representative_keys) {
    std::vector<Level> cell(static_cast<std::size_t>(scheme.p()), 0);
    for (std::size_t t = 0; t < key.vars.size(); ++t) cell[static_cast<std::size_t>(key.vars[t])] = key.levels[t];
    rep_cell.push_back(scheme.flat(cell));
  }
  Rng rng = make_rng(derive_seed(seed, 0));
  res.draws.reserve(static_cast<std::size_t>(cfg.n_draws));
  for (long t = 0; t < cfg.n_draws; ++t) {
    ParafacExpansion e = draw_prior_parafac(scheme, cfg.m, cfg.schedule, cfg.beta, rng);
    std::vector<double> th = corner_coefficients(eval_parafac(e));
    PriorDraw d;
    d.l1.assign(static_cast<std::size_t>(cfg.p), 0.0);
    for (std::size_t i = 1; i < th.size(); ++i) d.l1[static_cast<std::size_t>(order[i] - 1)] += std::abs(th[i]);
    for (std::size_t c : rep_cell) d.representative.push_back(th[c]);
    res.draws.push_back(std::move(d));
  }
  return res;
}

struct SimulatedData {
  LogLinearModel model;
  ProbabilityTensor truth;
  Dataset data;
};

/// n iid cells from a tensor, by inverse CDF on the flat cell order.
inline Dataset sample_cells(const ProbabilityTensor& pi, long n, Rng& rng) {
  require(n >= 0, ErrorKind::usage, "sample size must be nonnegative");
  require(n <= (1L << 31) - 1, ErrorKind::cap_exceeded, "sample size too large");
  VariableScheme scheme = VariableScheme::from_shape(pi.shape());
  std::vector<double> cdf(pi.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += pi[i]);
  Dataset ds{scheme, static_cast<int>(n), {}};
  ds.y.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(scheme.p()));
  for (long i = 0; i < n; ++i) {
    double u = uniform01(rng) * acc;
    std::size_t idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    idx = std::min(idx, cdf.size() - 1);
    while (pi[idx] == 0.0 && idx > 0) --idx;
    for (Level l : scheme.unflatten(idx)) ds.y.push_back(l);
  }
  return ds;
}

inline SimulatedData simulate_dataset(const VariableScheme& scheme, const Graph& graph, long n, double sigma2, std::uint64_t seed) {
  Rng model_rng = make_rng(derive_seed(seed, 0));
  Rng data_rng = make_rng(derive_seed(seed, 1));
  LogLinearModel model = random_model_from_graph(scheme, graph, sigma2, model_rng);
  ProbabilityTensor truth = tensor_from_loglinear(model).pi;
  Dataset ds = sample_cells(truth, n, data_rng);
  return {std::move(model), std::move(truth), std::move(ds)};
}

struct CoverageRow {
  InteractionKey key;
  double truth = 0.0;
  Interval interval;
  bool covered = false;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  double coverage = 0.0;
};

/// Coverage over every two-way coefficient of the scheme (absent keys have
/// truth 0).
inline CoverageReport coverage_report(const PosteriorSummary& summary, const LogLinearModel& truth) {
  CoverageReport rep;
  const VariableScheme& scheme = truth.scheme();
  for (Var a = 0; a < scheme.p(); ++a)
    for (Var b = a + 1; b < scheme.p(); ++b)
      for (const auto& key : keys_on(scheme, {a, b})) {
        auto it = summary.theta_intervals.find(key);
        require(it != summary.theta_intervals.end(), ErrorKind::input, "summary lacks two-way coefficients");
        CoverageRow row{key, truth.get(key), it->second, false};
        row.covered = row.interval.lower <= row.truth && row.truth <= row.interval.upper;
        rep.rows.push_back(row);
      }
  require(!rep.rows.empty(), ErrorKind::input, "coverage needs at least one two-way coefficient");
  double hit = 0.0;
  for (const auto& r : rep.rows) hit += r.covered;
  rep.coverage = hit / static_cast<double>(rep.rows.size());
  return rep;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<long> counts;
};

inline Histogram histogram(const std::vector<double>& xs, int bins, double lo = std::nan(""), double hi = std::nan("")) {
  require(bins >= 1, ErrorKind::usage, "histogram needs at least one bin");
  if (std::isnan(lo)) lo = xs.empty() ? 0.0 : *std::min_element(xs.begin(), xs.end());
  if (std::isnan(hi)) hi = xs.empty() ? 1.0 : *std::max_element(xs.begin(), xs.end());
  if (hi <= lo) hi = lo + 1.0;
  Histogram h;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double x : xs) {
    if (!(x >= lo && x <= hi)) continue;
    int b = std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace tensorank
