#pragma once

// Bayesian collapsed-Tucker model and its Gibbs sampler.
//
//   y_ij | z, s     ~ lambda^(j)_{z_{i,s_j}}
//   z_is | w_i      ~ psi^(s)_{w_i}           (stick-breaking over m classes)
//   w_i             ~ nu                       (stick-breaking over k core components)
//   s_j             ~ xi,  xi ~ Dirichlet(1/k, ..., 1/k)
//
// Group and latent-class indices are 0-based. The final stick fraction of
// every truncated stick-breaking vector is fixed at 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/random.hpp"
#include "tensorank/scheme.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

/// Observations as an n x p row-major matrix of 0-based levels.
struct Dataset {
  VariableScheme scheme;
  int n = 0;
  std::vector<Level> y;

  Level at(int i, Var j) const { return y[static_cast<std::size_t>(i) * static_cast<std::size_t>(scheme.p()) + static_cast<std::size_t>(j)]; }

  void validate() const {
    require(y.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(scheme.p()), ErrorKind::input, "data size mismatch");
    for (int i = 0; i < n; ++i)
      for (Var j = 0; j < scheme.p(); ++j)
        require(at(i, j) >= 0 && at(i, j) < scheme.levels(j), ErrorKind::input, "observation level out of range");
  }

  /// Cell counts over the scheme.
  std::vector<double> counts() const {
    std::vector<double> c(scheme.cells(), 0.0);
    std::vector<Level> cell(static_cast<std::size_t>(scheme.p()));
    for (int i = 0; i < n; ++i) {
      for (Var j = 0; j < scheme.p(); ++j) cell[static_cast<std::size_t>(j)] = at(i, j);
      c[scheme.flat(cell)] += 1.0;
    }
    return c;
  }
};

enum class ArmSchedule { flat, decreasing };

inline ArmSchedule parse_arm_schedule(const std::string& s) {
  if (s == "flat") return ArmSchedule::flat;
  if (s == "decreasing") return ArmSchedule::decreasing;
  fail(ErrorKind::usage, "arm schedule must be flat or decreasing, got '" + s + "'");
}

inline const char* to_string(ArmSchedule a) { return a == ArmSchedule::flat ? "flat" : "decreasing"; }

/// Dirichlet concentration for arm h of a variable with d levels.
inline double arm_concentration(ArmSchedule sched, int h, int d) {
  if (sched == ArmSchedule::flat || h == 0) return 1.0;
  const double dd = static_cast<double>(d);
  return h <= 2 ? 1.0 / dd : 1.0 / (dd * dd);
}

struct Hyperparameters {
  int m = 10;                       // latent classes per group
  int k = 3;                        // groups and core components
  ArmSchedule arms = ArmSchedule::decreasing;
  double a_beta = 1.0, b_beta = 1.0;
  double a_delta = 1.0, b_delta = 1.0;
  std::vector<int> fixed_groups;    // empty: groups are learned

  bool learn_groups() const { return fixed_groups.empty(); }

  void validate(int p) const {
    require(m >= 1 && k >= 1, ErrorKind::usage, "m and k must be at least 1");
    require(a_beta > 0 && b_beta > 0 && a_delta > 0 && b_delta > 0, ErrorKind::usage, "gamma hyperparameters must be positive");
    if (!fixed_groups.empty()) {
      require(static_cast<int>(fixed_groups.size()) == p, ErrorKind::usage, "fixed groups need one label per variable");
      for (int g : fixed_groups) require(g >= 0 && g < k, ErrorKind::usage, "fixed group label out of range");
    }
  }
};

struct CTuckerState {
  std::vector<std::vector<Vec>> lambda;   // [j][h][c]
  std::vector<int> z;                     // [i*k + s]
  std::vector<int> w;                     // [i]
  Vec nu_star;                            // [l], last is 1
  std::vector<std::vector<Vec>> zeta;     // [s][l][h], last h is 1
  std::vector<int> groups;                // [j]
  Vec xi;                                 // [s]
  double beta = 1.0;
  Vec delta;                              // [s]

  int n() const { return static_cast<int>(w.size()); }
  int k() const { return static_cast<int>(xi.size()); }
  int m() const { return lambda.empty() ? 0 : static_cast<int>(lambda[0].size()); }

  Vec nu() const { return stick_weights(nu_star); }
  Vec psi(int s, int l) const { return stick_weights(zeta[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)]); }
};

/// Throws when any range, simplex or positivity constraint is broken.
inline void check_state(const CTuckerState& st, const Dataset& data, const Hyperparameters& hp) {
  const int p = data.scheme.p(), n = data.n, k = hp.k, m = hp.m;
  auto bad = [](const char* what) { fail(ErrorKind::numeric, std::string("state invariant broken: ") + what); };
  if (static_cast<int>(st.lambda.size()) != p) bad("lambda arity");
  for (Var j = 0; j < p; ++j) {
    if (static_cast<int>(st.lambda[static_cast<std::size_t>(j)].size()) != m) bad("lambda classes");
    for (const auto& a : st.lambda[static_cast<std::size_t>(j)])
      if (static_cast<int>(a.size()) != data.scheme.levels(j) || !detail::on_simplex(a, 1e-10)) bad("lambda simplex");
  }
  if (static_cast<int>(st.z.size()) != n * k || static_cast<int>(st.w.size()) != n) bad("latent sizes");
  for (int v : st.z)
    if (v < 0 || v >= m) bad("z range");
  for (int v : st.w)
    if (v < 0 || v >= k) bad("w range");
  if (static_cast<int>(st.nu_star.size()) != k || st.nu_star.back() != 1.0) bad("nu sticks");
  for (int l = 0; l + 1 < k; ++l)
    if (!(st.nu_star[static_cast<std::size_t>(l)] > 0.0 && st.nu_star[static_cast<std::size_t>(l)] < 1.0)) bad("nu stick range");
  if (static_cast<int>(st.zeta.size()) != k) bad("zeta groups");
  for (const auto& per_s : st.zeta) {
    if (static_cast<int>(per_s.size()) != k) bad("zeta components");
    for (const auto& row : per_s) {
      if (static_cast<int>(row.size()) != m || row.back() != 1.0) bad("zeta sticks");
      for (int h = 0; h + 1 < m; ++h)
        if (!(row[static_cast<std::size_t>(h)] > 0.0 && row[static_cast<std::size_t>(h)] < 1.0)) bad("zeta range");
    }
  }
  if (static_cast<int>(st.groups.size()) != p) bad("groups size");
  for (int g : st.groups)
    if (g < 0 || g >= k) bad("group range");
  if (!detail::on_simplex(st.xi, 1e-10)) bad("xi simplex");
  if (!(st.beta > 0.0) || !std::isfinite(st.beta)) bad("beta");
  if (static_cast<int>(st.delta.size()) != k) bad("delta size");
  for (double d : st.delta)
    if (!(d > 0.0) || !std::isfinite(d)) bad("delta");
}

namespace detail {

inline double beta_fraction(Rng& rng, double a, double b) { return beta_variate(rng, a, b); }

inline Vec arm_prior(const Hyperparameters& hp, int h, int d) {
  return Vec(static_cast<std::size_t>(d), arm_concentration(hp.arms, h, d));
}

}  // namespace detail

/// Draws every parameter from the prior, then the labels from their prior
/// predictive (z given w, w given nu).
inline CTuckerState init_state(const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  data.validate();
  require(data.n >= 1, ErrorKind::input, "the sampler needs at least one observation");
  const int p = data.scheme.p(), n = data.n, k = hp.k, m = hp.m;
  hp.validate(p);
  CTuckerState st;
  st.beta = gamma_rate(rng, hp.a_beta, hp.b_beta);
  st.delta.resize(static_cast<std::size_t>(k));
  for (auto& d : st.delta) d = gamma_rate(rng, hp.a_delta, hp.b_delta);
  st.lambda.resize(static_cast<std::size_t>(p));
  for (Var j = 0; j < p; ++j)
    for (int h = 0; h < m; ++h) st.lambda[static_cast<std::size_t>(j)].push_back(dirichlet(rng, detail::arm_prior(hp, h, data.scheme.levels(j))));
  st.nu_star.assign(static_cast<std::size_t>(k), 1.0);
  for (int l = 0; l + 1 < k; ++l) st.nu_star[static_cast<std::size_t>(l)] = detail::beta_fraction(rng, 1.0, st.beta);
  st.zeta.assign(static_cast<std::size_t>(k), std::vector<Vec>(static_cast<std::size_t>(k), Vec(static_cast<std::size_t>(m), 1.0)));
  for (int s = 0; s < k; ++s)
    for (int l = 0; l < k; ++l)
      for (int h = 0; h + 1 < m; ++h)
        st.zeta[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] =
            detail::beta_fraction(rng, 1.0, st.delta[static_cast<std::size_t>(s)]);
  st.xi = dirichlet(rng, Vec(static_cast<std::size_t>(k), 1.0 / k));
  if (hp.learn_groups()) {
    st.groups.resize(static_cast<std::size_t>(p));
    for (auto& g : st.groups) g = categorical(rng, st.xi);
  } else {
    st.groups = hp.fixed_groups;
  }
  Vec nu = st.nu();
  st.w.resize(static_cast<std::size_t>(n));
  st.z.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    st.w[static_cast<std::size_t>(i)] = categorical(rng, nu);
    for (int s = 0; s < k; ++s) st.z[static_cast<std::size_t>(i * k + s)] = categorical(rng, st.psi(s, st.w[static_cast<std::size_t>(i)]));
  }
  return st;
}

// ---- individual full-conditional updates -------------------------------

/// Arms from Dirichlet(a_h + counts of y_ij among i with z_{i,s_j} = h).
inline void step_arms(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  const int p = data.scheme.p(), k = hp.k, m = hp.m;
  for (Var j = 0; j < p; ++j) {
    const int d = data.scheme.levels(j);
    const int s = st.groups[static_cast<std::size_t>(j)];
    std::vector<Vec> counts(static_cast<std::size_t>(m), Vec(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < data.n; ++i)
      counts[static_cast<std::size_t>(st.z[static_cast<std::size_t>(i * k + s)])][static_cast<std::size_t>(data.at(i, j))] += 1.0;
    for (int h = 0; h < m; ++h) {
      Vec alpha = detail::arm_prior(hp, h, d);
      for (int c = 0; c < d; ++c) alpha[static_cast<std::size_t>(c)] += counts[static_cast<std::size_t>(h)][static_cast<std::size_t>(c)];
      dirichlet(rng, alpha, st.lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(h)]);
    }
  }
}

/// Z_is proportional to prod_{j in group s} lambda^(j)_{h, y_ij} times psi^(s)_{w_i, h}.
inline void step_z(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  const int p = data.scheme.p(), k = hp.k, m = hp.m;
  std::vector<std::vector<Vec>> log_lambda(static_cast<std::size_t>(p));
  for (Var j = 0; j < p; ++j)
    for (const auto& a : st.lambda[static_cast<std::size_t>(j)]) {
      Vec la(a.size());
      for (std::size_t c = 0; c < a.size(); ++c) la[c] = std::log(a[c]);
      log_lambda[static_cast<std::size_t>(j)].push_back(std::move(la));
    }
  std::vector<std::vector<Vec>> log_psi(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s)
    for (int l = 0; l < k; ++l) {
      Vec ps = st.psi(s, l);
      for (double& x : ps) x = std::log(x);
      log_psi[static_cast<std::size_t>(s)].push_back(std::move(ps));
    }
  std::vector<std::vector<Var>> members(static_cast<std::size_t>(k));
  for (Var j = 0; j < p; ++j) members[static_cast<std::size_t>(st.groups[static_cast<std::size_t>(j)])].push_back(j);
  Vec logw(static_cast<std::size_t>(m));
  for (int i = 0; i < data.n; ++i) {
    const int wi = st.w[static_cast<std::size_t>(i)];
    for (int s = 0; s < k; ++s) {
      for (int h = 0; h < m; ++h) {
        double v = log_psi[static_cast<std::size_t>(s)][static_cast<std::size_t>(wi)][static_cast<std::size_t>(h)];
        for (Var j : members[static_cast<std::size_t>(s)])
          v += log_lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(h)][static_cast<std::size_t>(data.at(i, j))];
        logw[static_cast<std::size_t>(h)] = v;
      }
      st.z[static_cast<std::size_t>(i * k + s)] = categorical_log(rng, logw);
    }
  }
}

/// W_i proportional to nu_l prod_s psi^(s)_{l, z_is}.
inline void step_w(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  const int k = hp.k;
  Vec log_nu = st.nu();
  for (double& x : log_nu) x = std::log(x);
  std::vector<std::vector<Vec>> log_psi(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s)
    for (int l = 0; l < k; ++l) {
      Vec ps = st.psi(s, l);
      for (double& x : ps) x = std::log(x);
      log_psi[static_cast<std::size_t>(s)].push_back(std::move(ps));
    }
  Vec logw(static_cast<std::size_t>(k));
  for (int i = 0; i < data.n; ++i) {
    for (int l = 0; l < k; ++l) {
      double v = log_nu[static_cast<std::size_t>(l)];
      for (int s = 0; s < k; ++s) v += log_psi[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)][static_cast<std::size_t>(st.z[static_cast<std::size_t>(i * k + s)])];
      logw[static_cast<std::size_t>(l)] = v;
    }
    st.w[static_cast<std::size_t>(i)] = categorical_log(rng, logw);
  }
}

/// Nu*_l ~ Beta(1 + m_l, beta + m_{l+}), l < k - 1.
inline void step_nu(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  const int k = hp.k;
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < data.n; ++i) count[static_cast<std::size_t>(st.w[static_cast<std::size_t>(i)])] += 1.0;
  double above = static_cast<double>(data.n);
  for (int l = 0; l + 1 < k; ++l) {
    above -= count[static_cast<std::size_t>(l)];
    st.nu_star[static_cast<std::size_t>(l)] = beta_variate(rng, 1.0 + count[static_cast<std::size_t>(l)], st.beta + above);
  }
}

/// Zeta^(s)_{lh} ~ Beta(1 + n^(s)_{lh}, delta_s + n^(s)_{lh+}), h < m - 1.
inline void step_zeta(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  const int k = hp.k, m = hp.m;
  for (int s = 0; s < k; ++s) {
    std::vector<Vec> count(static_cast<std::size_t>(k), Vec(static_cast<std::size_t>(m), 0.0));
    for (int i = 0; i < data.n; ++i)
      count[static_cast<std::size_t>(st.w[static_cast<std::size_t>(i)])][static_cast<std::size_t>(st.z[static_cast<std::size_t>(i * k + s)])] += 1.0;
    for (int l = 0; l < k; ++l) {
      double above = 0.0;
      for (double c : count[static_cast<std::size_t>(l)]) above += c;
      for (int h = 0; h + 1 < m; ++h) {
        above -= count[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)];
        st.zeta[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] =
            beta_variate(rng, 1.0 + count[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)], st.delta[static_cast<std::size_t>(s)] + above);
      }
    }
  }
}

/// Beta ~ Gamma(a + (k - 1), b - sum_{l < k-1} log(1 - nu*_l)).
/// Only the k - 1 free sticks carry information about beta.
inline void step_beta(CTuckerState& st, const Dataset&, const Hyperparameters& hp, Rng& rng) {
  double rate = hp.b_beta;
  for (int l = 0; l + 1 < hp.k; ++l) rate -= std::log1p(-st.nu_star[static_cast<std::size_t>(l)]);
  st.beta = gamma_rate(rng, hp.a_beta + (hp.k - 1), rate);
}

/// Delta_s ~ Gamma(a + k (m - 1), b - sum_l sum_{h < m-1} log(1 - zeta^(s)_{lh})).
inline void step_delta(CTuckerState& st, const Dataset&, const Hyperparameters& hp, Rng& rng) {
  for (int s = 0; s < hp.k; ++s) {
    double rate = hp.b_delta;
    for (int l = 0; l < hp.k; ++l)
      for (int h = 0; h + 1 < hp.m; ++h) rate -= std::log1p(-st.zeta[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)][static_cast<std::size_t>(h)]);
    st.delta[static_cast<std::size_t>(s)] = gamma_rate(rng, hp.a_delta + hp.k * (hp.m - 1), rate);
  }
}

/// S_j proportional to xi_l prod_i lambda^(j)_{z_{i,l}, y_ij}, one variable at a time.
inline void step_groups(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  if (!hp.learn_groups()) return;
  const int p = data.scheme.p(), k = hp.k;
  Vec logw(static_cast<std::size_t>(k));
  for (Var j = 0; j < p; ++j) {
    const auto& lam = st.lambda[static_cast<std::size_t>(j)];
    for (int l = 0; l < k; ++l) {
      double v = std::log(st.xi[static_cast<std::size_t>(l)]);
      for (int i = 0; i < data.n; ++i)
        v += std::log(lam[static_cast<std::size_t>(st.z[static_cast<std::size_t>(i * k + l)])][static_cast<std::size_t>(data.at(i, j))]);
      logw[static_cast<std::size_t>(l)] = v;
    }
    st.groups[static_cast<std::size_t>(j)] = categorical_log(rng, logw);
  }
}

/// Xi ~ Dirichlet(n_1 + 1/k, ..., n_k + 1/k).
inline void step_xi(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng) {
  if (!hp.learn_groups()) return;
  Vec alpha(static_cast<std::size_t>(hp.k), 1.0 / hp.k);
  for (Var j = 0; j < data.scheme.p(); ++j) alpha[static_cast<std::size_t>(st.groups[static_cast<std::size_t>(j)])] += 1.0;
  dirichlet(rng, alpha, st.xi);
}

/// One full sweep over every conditional, in order.
inline void gibbs_sweep(CTuckerState& st, const Dataset& data, const Hyperparameters& hp, Rng& rng, bool check = false) {
  step_arms(st, data, hp, rng);
  step_z(st, data, hp, rng);
  step_w(st, data, hp, rng);
  step_nu(st, data, hp, rng);
  step_zeta(st, data, hp, rng);
  step_beta(st, data, hp, rng);
  step_delta(st, data, hp, rng);
  step_groups(st, data, hp, rng);
  step_xi(st, data, hp, rng);
  if (check) check_state(st, data, hp);
}

/// Implied c-Tucker expansion: core phi_{h_1..h_k} = sum_l nu_l prod_s psi^(s)_{l,h_s}.
inline CTuckerExpansion implied_expansion(const CTuckerState& st, const VariableScheme& scheme) {
  const int k = st.k(), m = st.m();
  Shape core_shape(std::vector<int>(static_cast<std::size_t>(k), m));
  std::vector<double> core(core_shape.cells(), 0.0);
  Vec nu = st.nu();
  for (int l = 0; l < k; ++l) {
    std::vector<Vec> rows;
    for (int s = 0; s < k; ++s) rows.push_back(st.psi(s, l));
    std::vector<const Vec*> ptr;
    for (auto& r : rows) ptr.push_back(&r);
    detail::accumulate_rank_one(core, nu[static_cast<std::size_t>(l)], ptr);
  }
  std::vector<std::vector<Vec>> arms = st.lambda;
  for (auto& fam : arms)
    for (auto& a : fam) {
      double s = stable_sum(a);
      for (double& x : a) x /= s;
    }
  return CTuckerExpansion(scheme, st.groups, ProbabilityTensor::normalized(NonnegTensor(core_shape, std::move(core))), std::move(arms));
}

}  // namespace tensorank
