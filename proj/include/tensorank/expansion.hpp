#pragma once

// PARAFAC, Tucker and collapsed-Tucker expansions of probability tensors,
// plus unnormalized rank-one witnesses used for rank bookkeeping.

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/scheme.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

using Vec = std::vector<double>;

/// Per-variable level subsets H_j (0-based levels, sorted).
using HCollection = std::vector<std::vector<Level>>;

namespace detail {

inline bool on_simplex(std::span<const double> v, double tol = kSimplexTol) {
  if (v.empty()) return false;
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
  return std::abs(stable_sum(v) - 1.0) <= tol;
}

/// out += scale * (v_1 outer ... outer v_p), flattened row-major.
inline void accumulate_rank_one(std::vector<double>& out, double scale, const std::vector<const Vec*>& arms) {
  if (scale == 0.0) return;
  std::vector<double> cur{scale};
  std::vector<double> nxt;
  for (const Vec* a : arms) {
    nxt.assign(cur.size() * a->size(), 0.0);
    std::size_t t = 0;
    for (double x : cur)
      for (double y : *a) nxt[t++] = x * y;
    cur.swap(nxt);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += cur[i];
}

inline void check_arm(const Vec& arm, int d, const char* what) {
  require(static_cast<int>(arm.size()) == d, ErrorKind::input, std::string(what) + ": arm length does not match levels");
  require(on_simplex(arm), ErrorKind::input, std::string(what) + ": arm is not on the simplex");
}

}  // namespace detail

/// One rank-one term scale * (v_1 outer ... outer v_p) with nonnegative,
/// not necessarily normalized, vectors.
struct RankOneTerm {
  double scale = 1.0;
  std::vector<Vec> vecs;
};

/// Unnormalized nonnegative PARAFAC witness; term count bounds the rank of
/// whatever it evaluates to.
struct ParafacWitness {
  Shape shape;
  std::vector<RankOneTerm> terms;

  std::size_t size() const { return terms.size(); }

  void push(RankOneTerm t) {
    require(static_cast<int>(t.vecs.size()) == shape.p(), ErrorKind::input, "witness term arity mismatch");
    require(t.scale >= 0.0 && std::isfinite(t.scale), ErrorKind::input, "witness scale must be nonnegative");
    for (Var j = 0; j < shape.p(); ++j) {
      const Vec& v = t.vecs[static_cast<std::size_t>(j)];
      require(static_cast<int>(v.size()) == shape.levels(j), ErrorKind::input, "witness vector length mismatch");
      for (double x : v) require(x >= 0.0 && std::isfinite(x), ErrorKind::input, "witness vectors must be nonnegative");
    }
    terms.push_back(std::move(t));
  }
};

inline NonnegTensor eval_witness(const ParafacWitness& w) {
  std::vector<double> out(w.shape.cells(), 0.0);
  std::vector<const Vec*> arms;
  for (const auto& t : w.terms) {
    arms.clear();
    for (const auto& v : t.vecs) arms.push_back(&v);
    detail::accumulate_rank_one(out, t.scale, arms);
  }
  for (double& x : out) x = std::max(x, 0.0);
  return NonnegTensor(w.shape, std::move(out));
}

/// pi = sum_h weights[h] * arms[h][0] outer ... outer arms[h][p-1].
class ParafacExpansion {
 public:
  ParafacExpansion() = default;

  ParafacExpansion(VariableScheme scheme, Vec weights, std::vector<std::vector<Vec>> arms)
      : scheme_(std::move(scheme)), weights_(std::move(weights)), arms_(std::move(arms)) {
    require(!weights_.empty(), ErrorKind::input, "PARAFAC needs at least one term");
    require(arms_.size() == weights_.size(), ErrorKind::input, "PARAFAC weights and arms differ in count");
    require(detail::on_simplex(weights_), ErrorKind::input, "PARAFAC weights are not on the simplex");
    for (const auto& term : arms_) {
      require(static_cast<int>(term.size()) == scheme_.p(), ErrorKind::input, "PARAFAC arm arity mismatch");
      for (Var j = 0; j < scheme_.p(); ++j) detail::check_arm(term[static_cast<std::size_t>(j)], scheme_.levels(j), "PARAFAC");
    }
  }

  const VariableScheme& scheme() const { return scheme_; }
  std::size_t terms() const { return weights_.size(); }
  const Vec& weights() const { return weights_; }
  /// arms()[h][j] is the length-d_j arm of term h for variable j.
  const std::vector<std::vector<Vec>>& arms() const { return arms_; }

  ParafacWitness witness() const {
    ParafacWitness w{scheme_, {}};
    for (std::size_t h = 0; h < weights_.size(); ++h) w.push({weights_[h], arms_[h]});
    return w;
  }

 private:
  VariableScheme scheme_;
  Vec weights_;
  std::vector<std::vector<Vec>> arms_;
};

/// Absorbs arm scales into the weights. Terms of zero mass are dropped since
/// they carry no probability and have no normalized arm.
inline ParafacExpansion normalize(const ParafacWitness& w) {
  VariableScheme scheme = VariableScheme::from_shape(w.shape);
  Vec weights;
  std::vector<std::vector<Vec>> arms;
  for (const auto& t : w.terms) {
    double mass = t.scale;
    std::vector<Vec> a = t.vecs;
    for (auto& v : a) {
      double s = stable_sum(v);
      mass *= s;
      if (s > 0.0)
        for (double& x : v) x /= s;
    }
    if (!(mass > 0.0)) continue;
    for (auto& v : a) {
      double s = stable_sum(v);
      for (double& x : v) x /= s;
    }
    weights.push_back(mass);
    arms.push_back(std::move(a));
  }
  require(!weights.empty(), ErrorKind::numeric, "witness has zero total mass");
  double total = stable_sum(weights);
  for (double& x : weights) x /= total;
  double again = stable_sum(weights);
  for (double& x : weights) x /= again;
  return ParafacExpansion(std::move(scheme), std::move(weights), std::move(arms));
}

inline ProbabilityTensor eval_parafac(const ParafacExpansion& e) {
  std::vector<double> out(e.scheme().cells(), 0.0);
  std::vector<const Vec*> arms;
  for (std::size_t h = 0; h < e.terms(); ++h) {
    arms.clear();
    for (const auto& v : e.arms()[h]) arms.push_back(&v);
    detail::accumulate_rank_one(out, e.weights()[h], arms);
  }
  return ProbabilityTensor::normalized(NonnegTensor(e.scheme(), std::move(out)));
}

/// pi_c = sum_{h_1..h_p} core[h] prod_j arms[j][h_j][c_j]; core is m^p.
class TuckerExpansion {
 public:
  TuckerExpansion() = default;

  TuckerExpansion(VariableScheme scheme, ProbabilityTensor core, std::vector<std::vector<Vec>> arms)
      : scheme_(std::move(scheme)), core_(std::move(core)), arms_(std::move(arms)) {
    require(core_.shape().p() == scheme_.p(), ErrorKind::input, "Tucker core arity mismatch");
    require(static_cast<int>(arms_.size()) == scheme_.p(), ErrorKind::input, "Tucker arm arity mismatch");
    for (Var j = 0; j < scheme_.p(); ++j) {
      const auto& fam = arms_[static_cast<std::size_t>(j)];
      require(static_cast<int>(fam.size()) == core_.shape().levels(j), ErrorKind::input, "Tucker arm count does not match core");
      for (const auto& a : fam) detail::check_arm(a, scheme_.levels(j), "Tucker");
    }
  }

  const VariableScheme& scheme() const { return scheme_; }
  const ProbabilityTensor& core() const { return core_; }
  /// arms()[j][h] is the arm for variable j and latent class h.
  const std::vector<std::vector<Vec>>& arms() const { return arms_; }

 private:
  VariableScheme scheme_;
  ProbabilityTensor core_;
  std::vector<std::vector<Vec>> arms_;
};

inline ProbabilityTensor eval_tucker(const TuckerExpansion& e) {
  // Successive mode products: replace core mode j (size m_j) by d_j.
  std::vector<int> dims = e.core().shape().dims();
  std::vector<double> cur(e.core().data().begin(), e.core().data().end());
  for (Var j = 0; j < e.scheme().p(); ++j) {
    const auto& fam = e.arms()[static_cast<std::size_t>(j)];
    const std::size_t m = static_cast<std::size_t>(dims[static_cast<std::size_t>(j)]);
    const std::size_t d = static_cast<std::size_t>(e.scheme().levels(j));
    std::size_t outer = 1, inner = 1;
    for (Var t = 0; t < j; ++t) outer *= static_cast<std::size_t>(dims[static_cast<std::size_t>(t)]);
    for (std::size_t t = static_cast<std::size_t>(j) + 1; t < dims.size(); ++t) inner *= static_cast<std::size_t>(dims[t]);
    std::vector<double> nxt(outer * d * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t h = 0; h < m; ++h) {
        const double* src = &cur[(o * m + h) * inner];
        for (std::size_t c = 0; c < d; ++c) {
          double a = fam[h][c];
          if (a == 0.0) continue;
          double* dst = &nxt[(o * d + c) * inner];
          for (std::size_t i = 0; i < inner; ++i) dst[i] += a * src[i];
        }
      }
    cur.swap(nxt);
    dims[static_cast<std::size_t>(j)] = static_cast<int>(d);
  }
  return ProbabilityTensor::normalized(NonnegTensor(e.scheme(), std::move(cur)));
}

/// Collapsed Tucker: variable j uses the latent index of its group s_j.
/// Core is m^k; each variable carries m arms.
class CTuckerExpansion {
 public:
  CTuckerExpansion() = default;

  CTuckerExpansion(VariableScheme scheme, std::vector<int> groups, ProbabilityTensor core, std::vector<std::vector<Vec>> arms)
      : scheme_(std::move(scheme)), groups_(std::move(groups)), core_(std::move(core)), arms_(std::move(arms)) {
    const int k = core_.shape().p();
    require(static_cast<int>(groups_.size()) == scheme_.p(), ErrorKind::input, "c-Tucker needs one group label per variable");
    for (int s : groups_) require(s >= 0 && s < k, ErrorKind::input, "c-Tucker group label out of range");
    require(static_cast<int>(arms_.size()) == scheme_.p(), ErrorKind::input, "c-Tucker arm arity mismatch");
    for (Var j = 0; j < scheme_.p(); ++j) {
      const auto& fam = arms_[static_cast<std::size_t>(j)];
      require(static_cast<int>(fam.size()) == core_.shape().levels(groups_[static_cast<std::size_t>(j)]), ErrorKind::input,
              "c-Tucker arm count does not match core");
      for (const auto& a : fam) detail::check_arm(a, scheme_.levels(j), "c-Tucker");
    }
  }

  const VariableScheme& scheme() const { return scheme_; }
  const std::vector<int>& groups() const { return groups_; }
  int k() const { return core_.shape().p(); }
  const ProbabilityTensor& core() const { return core_; }
  const std::vector<std::vector<Vec>>& arms() const { return arms_; }

 private:
  VariableScheme scheme_;
  std::vector<int> groups_;
  ProbabilityTensor core_;
  std::vector<std::vector<Vec>> arms_;
};

inline ProbabilityTensor eval_ctucker(const CTuckerExpansion& e) {
  std::vector<double> out(e.scheme().cells(), 0.0);
  std::vector<const Vec*> arms(static_cast<std::size_t>(e.scheme().p()));
  for (CellCursor h(e.core().shape()); !h.done(); h.next()) {
    double phi = e.core()[h.flat()];
    if (phi == 0.0) continue;
    for (Var j = 0; j < e.scheme().p(); ++j)
      arms[static_cast<std::size_t>(j)] = &e.arms()[static_cast<std::size_t>(j)][static_cast<std::size_t>(h[e.groups()[static_cast<std::size_t>(j)]])];
    detail::accumulate_rank_one(out, phi, arms);
  }
  return ProbabilityTensor::normalized(NonnegTensor(e.scheme(), std::move(out)));
}

/// Witness for the entrywise product: every pair of terms, with arms
/// multiplied entrywise. Term count is |a| * |b|.
inline ParafacWitness hadamard_witness(const ParafacWitness& a, const ParafacWitness& b) {
  require(a.shape == b.shape, ErrorKind::input, "hadamard: shape mismatch");
  ParafacWitness out{a.shape, {}};
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms) {
      RankOneTerm t{ta.scale * tb.scale, ta.vecs};
      for (std::size_t j = 0; j < t.vecs.size(); ++j)
        for (std::size_t c = 0; c < t.vecs[j].size(); ++c) t.vecs[j][c] *= tb.vecs[j][c];
      out.terms.push_back(std::move(t));
    }
  return out;
}

/// Witness for the entrywise sum: the two term lists concatenated.
inline ParafacWitness add_witness(const ParafacWitness& a, const ParafacWitness& b) {
  require(a.shape == b.shape, ErrorKind::input, "add: shape mismatch");
  ParafacWitness out = a;
  out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
  return out;
}

/// A PARAFAC expansion over a subset of the variables.
struct GroupExpansion {
  std::vector<Var> vars;  // sorted; the expansion's modes follow this order
  ParafacExpansion expansion;
};

struct JoinedTensor {
  ProbabilityTensor pi;
  ParafacWitness witness;  // prod_s m_s terms
};

/// Product of independent group tensors over a partition of the variables.
inline JoinedTensor join_independent(const VariableScheme& scheme, const std::vector<GroupExpansion>& parts) {
  require(!parts.empty(), ErrorKind::input, "join needs at least one group");
  std::vector<int> owner(static_cast<std::size_t>(scheme.p()), -1);
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto& g = parts[s];
    require(static_cast<int>(g.vars.size()) == g.expansion.scheme().p(), ErrorKind::input, "group arity mismatch");
    for (std::size_t t = 0; t < g.vars.size(); ++t) {
      Var v = g.vars[t];
      require(v >= 0 && v < scheme.p(), ErrorKind::input, "group variable out of range");
      require(owner[static_cast<std::size_t>(v)] < 0, ErrorKind::input, "groups overlap");
      require(g.expansion.scheme().levels(static_cast<Var>(t)) == scheme.levels(v), ErrorKind::input, "group levels mismatch");
      owner[static_cast<std::size_t>(v)] = static_cast<int>(s);
    }
  }
  for (int o : owner) require(o >= 0, ErrorKind::input, "groups do not cover every variable");

  ParafacWitness w{scheme, {}};
  std::vector<std::size_t> pick(parts.size(), 0);
  while (true) {
    RankOneTerm t{1.0, std::vector<Vec>(static_cast<std::size_t>(scheme.p()))};
    for (std::size_t s = 0; s < parts.size(); ++s) {
      const auto& ex = parts[s].expansion;
      t.scale *= ex.weights()[pick[s]];
      for (std::size_t q = 0; q < parts[s].vars.size(); ++q)
        t.vecs[static_cast<std::size_t>(parts[s].vars[q])] = ex.arms()[pick[s]][q];
    }
    w.terms.push_back(std::move(t));
    std::size_t s = parts.size();
    while (s-- > 0) {
      if (++pick[s] < parts[s].expansion.terms()) break;
      pick[s] = 0;
    }
    if (s == static_cast<std::size_t>(-1)) break;
  }
  return {ProbabilityTensor::normalized(eval_witness(w)), std::move(w)};
}

/// Two-variable construction: M agrees with lam1 outer lam2 outside the rows
/// H[0] and columns H[1]. Returns 1 + |H_1| + |H_2| terms: the baseline with
/// H-entries zeroed, one term per listed row, one per listed column (rows in
/// H_1 excluded from the column terms).
inline ParafacWitness construct_2d_expansion(const NonnegTensor& M, const Vec& lam1, const Vec& lam2, const HCollection& H,
                                             double tol = 1e-12) {
  const Shape& sh = M.shape();
  require(sh.p() == 2, ErrorKind::input, "2-D construction needs a matrix");
  require(H.size() == 2, ErrorKind::input, "2-D construction needs two level sets");
  const int r = sh.levels(0), c = sh.levels(1);
  require(static_cast<int>(lam1.size()) == r && static_cast<int>(lam2.size()) == c, ErrorKind::input, "baseline vector length mismatch");
  std::vector<bool> in_rows(static_cast<std::size_t>(r), false), in_cols(static_cast<std::size_t>(c), false);
  for (Level a : H[0]) {
    require(a >= 0 && a < r, ErrorKind::input, "row level out of range");
    in_rows[static_cast<std::size_t>(a)] = true;
  }
  for (Level b : H[1]) {
    require(b >= 0 && b < c, ErrorKind::input, "column level out of range");
    in_cols[static_cast<std::size_t>(b)] = true;
  }
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < c; ++b) {
      if (in_rows[static_cast<std::size_t>(a)] || in_cols[static_cast<std::size_t>(b)]) continue;
      double want = lam1[static_cast<std::size_t>(a)] * lam2[static_cast<std::size_t>(b)];
      double got = M[static_cast<std::size_t>(a) * static_cast<std::size_t>(c) + static_cast<std::size_t>(b)];
      require(std::abs(want - got) <= tol * std::max(1.0, std::abs(got)), ErrorKind::precondition,
              "H does not cover every cell where M departs from the baseline");
    }
  ParafacWitness w{sh, {}};
  Vec base1 = lam1, base2 = lam2;
  for (int a = 0; a < r; ++a)
    if (in_rows[static_cast<std::size_t>(a)]) base1[static_cast<std::size_t>(a)] = 0.0;
  for (int b = 0; b < c; ++b)
    if (in_cols[static_cast<std::size_t>(b)]) base2[static_cast<std::size_t>(b)] = 0.0;
  w.push({1.0, {base1, base2}});
  for (Level a : H[0]) {
    Vec e(static_cast<std::size_t>(r), 0.0), row(static_cast<std::size_t>(c));
    e[static_cast<std::size_t>(a)] = 1.0;
    for (int b = 0; b < c; ++b) row[static_cast<std::size_t>(b)] = M[static_cast<std::size_t>(a * c + b)];
    w.push({1.0, {e, row}});
  }
  for (Level b : H[1]) {
    Vec col(static_cast<std::size_t>(r), 0.0), e(static_cast<std::size_t>(c), 0.0);
    e[static_cast<std::size_t>(b)] = 1.0;
    for (int a = 0; a < r; ++a)
      if (!in_rows[static_cast<std::size_t>(a)]) col[static_cast<std::size_t>(a)] = M[static_cast<std::size_t>(a * c + b)];
    w.push({1.0, {col, e}});
  }
  return w;
}

}  // namespace tensorank
