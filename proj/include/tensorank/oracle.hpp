#pragma once

// Nonnegative rank estimates. The lower bound is the largest ordinary rank
// of a single-variable unfolding; the upper bound is the smallest m at which
// a nonnegative CP fit reaches the residual target.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/random.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

/// Matrix rank by SVD with singular values above rel_tol * sigma_max.
inline int numeric_rank(const Eigen::MatrixXd& A, double rel_tol = 1e-9) {
  if (A.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

/// Mode-j unfolding: rows are levels of j, columns the remaining cells.
inline Eigen::MatrixXd unfold(const NonnegTensor& t, Var j) {
  const Shape& sh = t.shape();
  const std::size_t d = static_cast<std::size_t>(sh.levels(j));
  const std::size_t cols = sh.cells() / d;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(cols));
  const std::size_t stride = sh.stride(j);
  for (std::size_t idx = 0; idx < sh.cells(); ++idx) {
    std::size_t c = (idx / stride) % d;
    std::size_t col = (idx / (stride * d)) * stride + idx % stride;
    M(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(col)) = t[idx];
  }
  return M;
}

struct NtfConfig {
  int restarts = 20;
  int max_iters = 1000;
  double eps = 1e-8;           // max-norm residual target on the unit-mass tensor
  std::uint64_t seed = 1;
  int stall_window = 250;      // give up a restart when the residual stops improving
  double stall_ratio = 0.999;
  int threads = 1;             // restarts run in batches of this size
  int polish_iters = 400;      // Levenberg-Marquardt steps after HALS (0: none)
};

struct NtfFit {
  int m = 0;
  double residual = std::numeric_limits<double>::infinity();  // best max-norm residual
  int restart = -1;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> factors;  // d_j x m, column scales folded into mode 0
};

namespace detail {

inline double max_residual(const NonnegTensor& x, const std::vector<Eigen::MatrixXd>& F, std::vector<double>& buf) {
  const int p = x.shape().p();
  const Eigen::Index m = F[0].cols();
  buf.assign(x.size(), 0.0);
  std::vector<double> cur, nxt;
  for (Eigen::Index r = 0; r < m; ++r) {
    cur.assign(1, 1.0);
    for (int j = 0; j < p; ++j) {
      const auto& A = F[static_cast<std::size_t>(j)];
      nxt.assign(cur.size() * static_cast<std::size_t>(A.rows()), 0.0);
      std::size_t t = 0;
      for (double a : cur)
        for (Eigen::Index c = 0; c < A.rows(); ++c) nxt[t++] = a * A(c, r);
      cur.swap(nxt);
    }
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += cur[i];
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) worst = std::max(worst, std::abs(buf[i] - x[i]));
  return worst;
}

/// X_(j) times the Khatri-Rao product of the other factors: d_j x m.
inline Eigen::MatrixXd mttkrp(const NonnegTensor& x, const std::vector<Eigen::MatrixXd>& F, int j) {
  const Shape& sh = x.shape();
  const int p = sh.p();
  const Eigen::Index m = F[0].cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(sh.levels(j), m);
  Eigen::RowVectorXd prod(m);
  for (CellCursor c(sh); !c.done(); c.next()) {
    double v = x[c.flat()];
    if (v == 0.0) continue;
    prod.setConstant(v);
    for (int q = 0; q < p; ++q)
      if (q != j) prod.array() *= F[static_cast<std::size_t>(q)].row(c[q]).array();
    out.row(c[j]) += prod;
  }
  return out;
}

/// Bound-constrained Levenberg-Marquardt on all factor entries. HALS gets
/// close fast but crawls toward fits whose factors have exact zeros.
inline double lm_polish(const NonnegTensor& x, std::vector<Eigen::MatrixXd>& F, const NtfConfig& cfg) {
  const Shape& sh = x.shape();
  const int p = sh.p();
  const Eigen::Index m = F[0].cols();
  std::vector<Eigen::Index> off(static_cast<std::size_t>(p) + 1, 0);
  for (int j = 0; j < p; ++j) off[static_cast<std::size_t>(j) + 1] = off[static_cast<std::size_t>(j)] + F[static_cast<std::size_t>(j)].rows() * m;
  const Eigen::Index np = off[static_cast<std::size_t>(p)];
  const Eigen::Index nc = static_cast<Eigen::Index>(sh.cells());
  auto index = [&](int j, Eigen::Index c, Eigen::Index r) { return off[static_cast<std::size_t>(j)] + r * F[static_cast<std::size_t>(j)].rows() + c; };

  Eigen::VectorXd theta(np);
  for (int j = 0; j < p; ++j)
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < F[static_cast<std::size_t>(j)].rows(); ++c) theta(index(j, c, r)) = F[static_cast<std::size_t>(j)](c, r);

  std::vector<double> pre(static_cast<std::size_t>(p) + 1), suf(static_cast<std::size_t>(p) + 1);
  // Residual model - x and, when asked, the Jacobian.
  auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& res, Eigen::MatrixXd* jac) {
    res.resize(nc);
    if (jac) jac->setZero(nc, np);
    for (CellCursor cur(sh); !cur.done(); cur.next()) {
      const Eigen::Index i = static_cast<Eigen::Index>(cur.flat());
      double v = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        pre[0] = 1.0;
        for (int j = 0; j < p; ++j) pre[static_cast<std::size_t>(j) + 1] = pre[static_cast<std::size_t>(j)] * th(index(j, cur[j], r));
        v += pre[static_cast<std::size_t>(p)];
        if (!jac) continue;
        suf[static_cast<std::size_t>(p)] = 1.0;
        for (int j = p - 1; j >= 0; --j) suf[static_cast<std::size_t>(j)] = suf[static_cast<std::size_t>(j) + 1] * th(index(j, cur[j], r));
        for (int j = 0; j < p; ++j) (*jac)(i, index(j, cur[j], r)) = pre[static_cast<std::size_t>(j)] * suf[static_cast<std::size_t>(j) + 1];
      }
      res(i) = v - x[static_cast<std::size_t>(i)];
    }
  };

  Eigen::VectorXd res, trial_res;
  Eigen::MatrixXd J;
  eval(theta, res, &J);
  double obj = res.squaredNorm();
  double mu = 1e-3, grow = 2.0;
  for (int it = 0; it < cfg.polish_iters && res.cwiseAbs().maxCoeff() >= cfg.eps; ++it) {
    Eigen::VectorXd g = J.transpose() * res;
    Eigen::MatrixXd H = J.transpose() * J;
    std::vector<Eigen::Index> free;
    for (Eigen::Index a = 0; a < np; ++a)
      if (!(theta(a) <= 0.0 && g(a) > 0.0)) free.push_back(a);
    if (free.empty()) break;
    const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Hf(nf, nf);
    Eigen::VectorXd gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf(a) = g(free[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    bool moved = false;
    while (mu < 1e12) {
      // Entries the step would push below zero are pinned there and the
      // rest re-solved, a few times over.
      std::vector<char> keep(static_cast<std::size_t>(nf), 1);
      Eigen::VectorXd trial = theta;
      for (int pass = 0; pass < 4; ++pass) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index a = 0; a < nf; ++a)
          if (keep[static_cast<std::size_t>(a)]) idx.push_back(a);
        const Eigen::Index nk = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd A(nk, nk);
        Eigen::VectorXd b(nk);
        for (Eigen::Index u = 0; u < nk; ++u) {
          const Eigen::Index fu = idx[static_cast<std::size_t>(u)];
          b(u) = -gf(fu);
          // The pinned entries move to zero; fold that shift into the rhs.
          for (Eigen::Index a = 0; a < nf; ++a)
            if (!keep[static_cast<std::size_t>(a)]) b(u) += Hf(fu, a) * theta(free[static_cast<std::size_t>(a)]);
          for (Eigen::Index v = 0; v < nk; ++v) A(u, v) = Hf(fu, idx[static_cast<std::size_t>(v)]);
          A(u, u) += mu * (Hf(fu, fu) + 1e-12);
        }
        Eigen::VectorXd step = nk > 0 ? Eigen::VectorXd(A.ldlt().solve(b)) : Eigen::VectorXd();
        trial = theta;
        bool clipped = false;
        for (Eigen::Index a = 0; a < nf; ++a)
          if (!keep[static_cast<std::size_t>(a)]) trial(free[static_cast<std::size_t>(a)]) = 0.0;
        for (Eigen::Index u = 0; u < nk; ++u) {
          const Eigen::Index q = free[static_cast<std::size_t>(idx[static_cast<std::size_t>(u)])];
          double v = theta(q) + step(u);
          if (v < 0.0) {
            keep[static_cast<std::size_t>(idx[static_cast<std::size_t>(u)])] = 0;
            clipped = true;
            v = 0.0;
          }
          trial(q) = v;
        }
        if (!clipped) break;
      }
      eval(trial, trial_res, nullptr);
      const double tobj = trial_res.squaredNorm();
      const double predicted = obj - (res + J * (trial - theta)).squaredNorm();
      if (std::isfinite(tobj) && tobj < obj) {
        // Nielsen's damping update from the gain ratio.
        const double rho = predicted > 0.0 ? (obj - tobj) / predicted : 1.0;
        theta = trial;
        obj = tobj;
        mu = std::max(mu * std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3)), 1e-15);
        grow = 2.0;
        moved = true;
        break;
      }
      mu *= grow;
      grow *= 2.0;
    }
    if (!moved) break;
    eval(theta, res, &J);
  }
  for (int j = 0; j < p; ++j)
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < F[static_cast<std::size_t>(j)].rows(); ++c) F[static_cast<std::size_t>(j)](c, r) = theta(index(j, c, r));
  return res.cwiseAbs().maxCoeff();
}

/// One HALS restart on the unit-mass tensor x.
inline NtfFit ntf_restart(const NonnegTensor& x, int m, const NtfConfig& cfg, int rs) {
  const int p = x.shape().p();
  constexpr double kFloor = 1e-300;
  std::vector<double> buf;
  Rng rng = make_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(rs)));
  std::vector<Eigen::MatrixXd> F;
  for (int j = 0; j < p; ++j) {
    Eigen::MatrixXd A(x.shape().levels(j), m);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = uniform01(rng);
    F.push_back(std::move(A));
  }
  // Start with unit mass, like the data.
  double mass = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    double prod = 1.0;
    for (int j = 0; j < p; ++j) prod *= F[static_cast<std::size_t>(j)].col(r).sum();
    mass += prod;
  }
  F[0] /= mass;

  double res = max_residual(x, F, buf);
  double window_start = res;
  int it = 0;
  for (; it < cfg.max_iters && res >= cfg.eps; ++it) {
    for (int j = 0; j < p; ++j) {
      Eigen::MatrixXd G = Eigen::MatrixXd::Ones(m, m);
      for (int q = 0; q < p; ++q)
        if (q != j) G.array() *= (F[static_cast<std::size_t>(q)].transpose() * F[static_cast<std::size_t>(q)]).array();
      Eigen::MatrixXd K = mttkrp(x, F, j);
      Eigen::MatrixXd& A = F[static_cast<std::size_t>(j)];
      for (Eigen::Index r = 0; r < m; ++r) {
        double g = G(r, r);
        if (g <= 0.0) continue;
        Eigen::VectorXd col = A.col(r) + (K.col(r) - A * G.col(r)) / g;
        A.col(r) = col.cwiseMax(kFloor);
      }
    }
    // Balance column norms across modes to keep the iteration well scaled.
    for (Eigen::Index r = 0; r < m; ++r) {
      double prod = 1.0;
      std::vector<double> norms(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) {
        norms[static_cast<std::size_t>(j)] = F[static_cast<std::size_t>(j)].col(r).norm();
        prod *= norms[static_cast<std::size_t>(j)];
      }
      if (prod <= 0.0) continue;
      double target = std::pow(prod, 1.0 / p);
      for (int j = 0; j < p; ++j) F[static_cast<std::size_t>(j)].col(r) *= target / norms[static_cast<std::size_t>(j)];
    }
    res = max_residual(x, F, buf);
    if ((it + 1) % cfg.stall_window == 0) {
      if (res > cfg.stall_ratio * window_start) break;
      window_start = res;
    }
  }
  if (res >= cfg.eps && cfg.polish_iters > 0) res = lm_polish(x, F, cfg);
  NtfFit f;
  f.m = m;
  f.residual = res;
  f.restart = rs;
  f.iterations = it;
  f.factors = std::move(F);
  return f;
}

}  // namespace detail

/// Multi-restart nonnegative CP by hierarchical alternating least squares.
/// The tensor is rescaled to unit mass first. Restarts stop at the first one
/// (by index) that reaches eps; batching over threads does not change the
/// result.
inline NtfFit fit_nonneg_cp(const NonnegTensor& t, int m, const NtfConfig& cfg) {
  require(m >= 1, ErrorKind::input, "rank must be positive");
  double total = t.sum();
  require(total > 0.0, ErrorKind::numeric, "cannot fit a zero tensor");
  std::vector<double> scaled(t.data().begin(), t.data().end());
  for (double& v : scaled) v /= total;
  const NonnegTensor x(t.shape(), std::move(scaled));

  NtfFit best;
  best.m = m;
  const int batch = std::max(1, cfg.threads);
  for (int first = 0; first < cfg.restarts; first += batch) {
    const int count = std::min(batch, cfg.restarts - first);
    std::vector<NtfFit> fits(static_cast<std::size_t>(count));
    if (count == 1) {
      fits[0] = detail::ntf_restart(x, m, cfg, first);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errs(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i)
        pool.emplace_back([&, i] {
          try {
            fits[static_cast<std::size_t>(i)] = detail::ntf_restart(x, m, cfg, first + i);
          } catch (...) {
            errs[static_cast<std::size_t>(i)] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    }
    for (auto& f : fits) {
      if (f.residual < best.residual) best = std::move(f);
      if (best.residual < cfg.eps) return best;
    }
  }
  return best;
}

struct OracleConfig {
  NtfConfig ntf;
  std::vector<int> m_range;       // empty: 1 .. min(product of all but largest d, 64)
  double rank_tol = 1e-9;
  std::optional<int> witness_terms;  // size of a known exact expansion, if any
};

struct OracleResult {
  int certified_lower = 0;
  std::optional<int> heuristic_upper;
  std::optional<int> certified_upper;   // from a supplied witness
  std::vector<std::pair<int, double>> residuals;  // (m, best residual)
  bool exact = false;
  std::optional<int> exact_rank;
};

inline OracleResult oracle_nonneg_rank(const NonnegTensor& t, const OracleConfig& cfg) {
  OracleResult r;
  const Shape& sh = t.shape();
  for (Var j = 0; j < sh.p(); ++j) r.certified_lower = std::max(r.certified_lower, numeric_rank(unfold(t, j), cfg.rank_tol));
  r.certified_upper = cfg.witness_terms;

  bool rule = false;
  if (sh.p() == 2 && r.certified_lower <= 2) rule = true;         // matrix rank <= 2 equals nonnegative rank
  if (r.certified_lower <= 1) rule = true;                        // all unfoldings rank one: a nonnegative outer product
  if (r.certified_upper && *r.certified_upper == r.certified_lower) rule = true;

  std::vector<int> ms = cfg.m_range;
  if (ms.empty()) {
    std::vector<int> d = sh.dims();
    std::sort(d.begin(), d.end());
    long cap = 1;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) cap = std::min<long>(64, cap * d[i]);
    for (int m = std::max(1, r.certified_lower); m <= cap; ++m) ms.push_back(m);
  }
  std::sort(ms.begin(), ms.end());
  for (int m : ms) {
    if (m < r.certified_lower) {
      r.residuals.emplace_back(m, std::numeric_limits<double>::infinity());
      continue;
    }
    NtfFit f = fit_nonneg_cp(t, m, cfg.ntf);
    r.residuals.emplace_back(m, f.residual);
    if (f.residual < cfg.ntf.eps) {
      r.heuristic_upper = m;
      break;
    }
  }
  if (rule) {
    r.exact = true;
    r.exact_rank = r.certified_lower;
  } else if (r.heuristic_upper && *r.heuristic_upper == r.certified_lower) {
    r.exact = true;
    r.exact_rank = r.certified_lower;
  }
  return r;
}

}  // namespace tensorank
