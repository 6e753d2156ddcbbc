#pragma once

// Upper bounds on the nonnegative PARAFAC and Tucker ranks of tensors
// generated by weakly hierarchical log-linear models.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/hitting_set.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/partition.hpp"

namespace tensorank {

using Count = std::uint64_t;
inline constexpr Count kCountMax = std::numeric_limits<Count>::max();

inline Count sat_mul(Count a, Count b) {
  if (a == 0 || b == 0) return 0;
  return a > kCountMax / b ? kCountMax : a * b;
}

inline Count sat_pow(Count base, int e) {
  Count r = 1;
  for (int i = 0; i < e; ++i) r = sat_mul(r, base);
  return r;
}

enum class PermutationSearch { exhaustive, greedy };

/// Exhaustive ordering search runs a subset DP (2^p states); above this it
/// falls back to greedy.
inline constexpr int kExhaustiveMaxP = 20;

struct OrderingBound {
  Count value = 1;
  std::vector<Var> sigma;                     // order of variables
  std::vector<std::vector<Level>> B;          // B_{sigma(j)}, j = 0..p-2
  bool exhaustive = true;
};

namespace detail {

/// partners[v][c]: bitmask of variables sharing a two-way key with (v, c).
inline std::vector<std::vector<std::uint32_t>> partner_masks(const LogLinearModel& m) {
  const int p = m.scheme().p();
  std::vector<std::vector<std::uint32_t>> out(static_cast<std::size_t>(p));
  for (Var v = 0; v < p; ++v) out[static_cast<std::size_t>(v)].assign(static_cast<std::size_t>(m.scheme().levels(v)), 0U);
  for (const auto& [k, val] : m.terms()) {
    if (k.order() != 2) continue;
    out[static_cast<std::size_t>(k.vars[0])][static_cast<std::size_t>(k.levels[0])] |= 1U << k.vars[1];
    out[static_cast<std::size_t>(k.vars[1])][static_cast<std::size_t>(k.levels[1])] |= 1U << k.vars[0];
  }
  return out;
}

inline std::vector<Level> b_set(const std::vector<std::vector<std::uint32_t>>& pm, Var v, std::uint32_t later) {
  std::vector<Level> out;
  const auto& row = pm[static_cast<std::size_t>(v)];
  for (std::size_t c = 0; c < row.size(); ++c)
    if (row[c] & later) out.push_back(static_cast<Level>(c));
  return out;
}

inline void require_weak(const LogLinearModel& m, HierarchyOptions opt) {
  require(is_weakly_hierarchical(m, opt), ErrorKind::precondition, "model is not weakly hierarchical");
}

}  // namespace detail

/// min over orderings of prod_{j < p} (|B_{sigma(j)}| + 1), where B collects
/// the levels of sigma(j) with a two-way interaction against a later
/// variable. Ties go to the lexicographically smallest ordering.
inline OrderingBound ordering_bound(const LogLinearModel& model, PermutationSearch mode = PermutationSearch::exhaustive,
                                     HierarchyOptions opt = {}) {
  detail::require_weak(model, opt);
  const int p = model.scheme().p();
  require(p <= 31, ErrorKind::cap_exceeded, "ordering search supports at most 31 variables");
  auto pm = detail::partner_masks(model);
  auto cost = [&](Var v, std::uint32_t later) -> Count {
    return static_cast<Count>(detail::b_set(pm, v, later).size()) + 1;
  };
  const std::uint32_t all = p == 32 ? ~0U : ((1U << p) - 1U);
  OrderingBound r;
  r.exhaustive = mode == PermutationSearch::exhaustive && p <= kExhaustiveMaxP;
  std::uint32_t remaining = all;
  if (r.exhaustive) {
    // f[S] = best product for ordering the set S (S non-empty); f of a
    // singleton is 1 since the last variable contributes no factor.
    std::vector<Count> f(std::size_t{1} << p, kCountMax);
    f[0] = 1;
    for (std::uint32_t S = 1; S <= all; ++S) {
      if ((S & (S - 1)) == 0) {
        f[S] = 1;
        continue;
      }
      Count best = kCountMax;
      for (Var v = 0; v < p; ++v) {
        if (!(S >> v & 1U)) continue;
        std::uint32_t rest = S & ~(1U << v);
        best = std::min(best, sat_mul(cost(v, rest), f[rest]));
      }
      f[S] = best;
    }
    r.value = f[all];
    while (remaining) {
      for (Var v = 0; v < p; ++v) {
        if (!(remaining >> v & 1U)) continue;
        std::uint32_t rest = remaining & ~(1U << v);
        Count c = rest ? sat_mul(cost(v, rest), f[rest]) : 1;
        if (c == f[remaining] || !rest) {
          r.sigma.push_back(v);
          remaining = rest;
          break;
        }
      }
    }
  } else {
    while (remaining) {
      Var pick = -1;
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (Var v = 0; v < p; ++v) {
        if (!(remaining >> v & 1U)) continue;
        std::size_t b = detail::b_set(pm, v, remaining & ~(1U << v)).size();
        if (b < best) {
          best = b;
          pick = v;
        }
      }
      r.sigma.push_back(pick);
      remaining &= ~(1U << pick);
    }
    r.value = 1;
  }
  std::uint32_t later = all;
  Count check = 1;
  for (int t = 0; t + 1 < p; ++t) {
    Var v = r.sigma[static_cast<std::size_t>(t)];
    later &= ~(1U << v);
    r.B.push_back(detail::b_set(pm, v, later));
    check = sat_mul(check, static_cast<Count>(r.B.back().size()) + 1);
  }
  if (!r.exhaustive) r.value = check;
  return r;
}

struct HBound {
  Count value = 1;
  HCollection H;
};

struct TightBound {
  Count value = 1;
  HCollection H;
  Var l = -1;                 // merge variable (-1 when no interactions)
  std::vector<Var> W;         // j != l in V* with |H_j| = d_j - 1
  std::vector<Var> W_bar;     // V* \ W (contains l)
};

struct CoverBoundsReport {
  HBound cover;
  TightBound tight;
  HBound tucker;
  SupportSummary support;
  CoverSearchStats stats;
};

/// prod_{j in V*} (|H_j| + 1).
inline Count cover_value(const HCollection& H, const std::vector<Var>& active) {
  Count v = 1;
  for (Var j : active) v = sat_mul(v, H[static_cast<std::size_t>(j)].size() + 1);
  return v;
}

/// prod (|H_j|+1) - |H_l| * prod_{j != l} s_j, s_j = |H_j|+1 when H_j holds
/// d_j - 1 levels (its complement is a singleton), |H_j| otherwise.
inline Count tight_value(const HCollection& H, const std::vector<Var>& active, const std::vector<int>& levels, Var l) {
  Count total = cover_value(H, active);
  Count cut = H[static_cast<std::size_t>(l)].size();
  for (Var j : active) {
    if (j == l) continue;
    std::size_t h = H[static_cast<std::size_t>(j)].size();
    cut = sat_mul(cut, static_cast<int>(h) == levels[static_cast<std::size_t>(j)] - 1 ? h + 1 : h);
  }
  return total - std::min(cut, total);
}

inline Count tucker_value(const HCollection& H, const std::vector<Var>& active) {
  Count v = 1;
  for (Var j : active) v = std::max<Count>(v, H[static_cast<std::size_t>(j)].size() + 1);
  return v;
}

/// Searches the hitting collection for the dimension-free, tight and Tucker
/// bounds. The dimension-free and Tucker bounds are monotone in H, so minimal covers
/// suffice. The tight bound is not monotone: a variable whose H_j is filled
/// to all non-baseline levels gains a singleton complement, so for every
/// minimal cover and merge variable each subset of the other active
/// variables is also tried filled.
inline CoverBoundsReport cover_bounds(const LogLinearModel& model, HierarchyOptions opt = {},
                                      std::uint64_t node_cap = kDefaultNodeCap) {
  detail::require_weak(model, opt);
  CoverBoundsReport rep;
  rep.support = support_summary(model, opt);
  const int p = model.scheme().p();
  const auto& active = rep.support.active;
  const std::vector<int>& levels = model.scheme().dims();
  HCollection empty(static_cast<std::size_t>(p));
  rep.cover = {1, empty};
  rep.tucker = {1, empty};
  rep.tight = {1, empty, -1, {}, {}};
  if (active.empty()) return rep;

  bool first = true;
  auto better = [](Count v, const HCollection& H, Count bv, const HCollection& bH) {
    return v < bv || (v == bv && H < bH);
  };
  std::vector<Var> fillable;
  CoverSearch search(p, rep.support.two_way);
  rep.stats = search.run([&](const HCollection& H) {
    Count e11 = cover_value(H, active);
    Count tk = tucker_value(H, active);
    if (first || better(e11, H, rep.cover.value, rep.cover.H)) rep.cover = {e11, H};
    if (first || better(tk, H, rep.tucker.value, rep.tucker.H)) rep.tucker = {tk, H};
    for (Var l : active) {
      fillable.clear();
      for (Var j : active)
        if (j != l && static_cast<int>(H[static_cast<std::size_t>(j)].size()) < levels[static_cast<std::size_t>(j)] - 1)
          fillable.push_back(j);
      require(fillable.size() < 31, ErrorKind::cap_exceeded, "too many active variables for the tight-bound search");
      for (std::uint32_t mask = 0; mask < (1U << fillable.size()); ++mask) {
        HCollection G = H;
        for (std::size_t t = 0; t < fillable.size(); ++t)
          if (mask >> t & 1U) {
            Var j = fillable[t];
            auto& g = G[static_cast<std::size_t>(j)];
            g.clear();
            for (Level c = 1; c < levels[static_cast<std::size_t>(j)]; ++c) g.push_back(c);
          }
        Count v = tight_value(G, active, levels, l);
        if (first || v < rep.tight.value || (v == rep.tight.value && (G < rep.tight.H || (G == rep.tight.H && l < rep.tight.l)))) {
          rep.tight.value = v;
          rep.tight.H = G;
          rep.tight.l = l;
        }
        first = false;
      }
    }
    first = false;
    return true;
  }, node_cap);
  require(rep.stats.yielded > 0, ErrorKind::cap_exceeded, "node cap reached before any hitting collection was found");
  for (Var j : active) {
    if (j != rep.tight.l && static_cast<int>(rep.tight.H[static_cast<std::size_t>(j)].size()) == levels[static_cast<std::size_t>(j)] - 1)
      rep.tight.W.push_back(j);
    else
      rep.tight.W_bar.push_back(j);
  }
  return rep;
}

inline HBound cover_bound(const LogLinearModel& model, HierarchyOptions opt = {}) { return cover_bounds(model, opt).cover; }
inline TightBound tight_cover_bound(const LogLinearModel& model, HierarchyOptions opt = {}) {
  return cover_bounds(model, opt).tight;
}
inline HBound tucker_rank_bound(const LogLinearModel& model, HierarchyOptions opt = {}) { return cover_bounds(model, opt).tucker; }

/// Witness partition for a tight-bound result: the product partition of H,
/// merged along l with the independent variables ignored.
inline Partition tight_partition(const Shape& shape, const TightBound& t, const std::vector<Var>& independent) {
  Partition part = build_partition(shape, t.H);
  if (t.l >= 0) part = merge_partition(part, t.l, independent);
  return part;
}

struct StructuralBound {
  bool applies = false;
  Count value = 0;     // meaningful only when applies
  std::string reason;  // why it does not apply
};

struct StructuralBounds {
  int m = 1;            // max_j |C^(j)| + 1
  StructuralBound few_levels;        // m^(p-1)
  StructuralBound conditional;       // m^|J|: every interaction has at most one variable outside J
  StructuralBound marginal;          // m^|J|: variables outside J interact with nothing
};

/// Bounds from structural conditions on the support. m is the smallest value with
/// |C^(j)| <= m - 1 for every j.
inline StructuralBounds structural_bounds(const LogLinearModel& model, const std::optional<std::vector<Var>>& J = std::nullopt,
                                        HierarchyOptions opt = {}) {
  detail::require_weak(model, opt);
  StructuralBounds r;
  SupportSummary s = support_summary(model, opt);
  const int p = model.scheme().p();
  std::size_t mx = 0;
  for (const auto& c : s.interacting_levels) mx = std::max(mx, c.size());
  r.m = static_cast<int>(mx) + 1;
  r.few_levels = {true, sat_pow(static_cast<Count>(r.m), p - 1), ""};
  if (!J) {
    r.conditional.reason = r.marginal.reason = "no conditioning set given";
    return r;
  }
  std::vector<bool> inJ(static_cast<std::size_t>(p), false);
  for (Var v : *J) {
    require(v >= 0 && v < p, ErrorKind::input, "J variable out of range");
    inJ[static_cast<std::size_t>(v)] = true;
  }
  int size = static_cast<int>(std::count(inJ.begin(), inJ.end(), true));
  bool cond = true;
  for (const auto& k : s.interactions) {
    int outside = 0;
    for (Var v : k.vars) outside += inJ[static_cast<std::size_t>(v)] ? 0 : 1;
    if (outside > 1) cond = false;
  }
  r.conditional = cond ? StructuralBound{true, sat_pow(static_cast<Count>(r.m), size), ""}
                       : StructuralBound{false, 0, "an interaction involves two variables outside J"};
  bool marg = size < p || p == 0;
  std::string why = marg ? "" : "J must be a proper subset";
  for (Var j = 0; j < p && marg; ++j)
    if (!inJ[static_cast<std::size_t>(j)] && !s.interacting_levels[static_cast<std::size_t>(j)].empty()) {
      marg = false;
      why = "a variable outside J interacts";
    }
  r.marginal = marg ? StructuralBound{true, sat_pow(static_cast<Count>(r.m), size), ""} : StructuralBound{false, 0, why};
  return r;
}

}  // namespace tensorank
