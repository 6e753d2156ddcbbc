#pragma once

// Product partitions of the cell space and the latent-class expansions they
// induce. A block is a product event B_1 x ... x B_p; conditioning on each
// block must leave the variables independent for the partition to yield an
// exact PARAFAC expansion with one term per block.

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/scheme.hpp"
#include "tensorank/tensor.hpp"

namespace tensorank {

struct Partition {
  Shape shape;
  std::vector<ProductEvent> blocks;
  HCollection H;            // generating collection
  int merged_var = -1;      // l of the canonical merge, or -1
  bool pristine = true;     // still the unmerged product partition

  std::size_t size() const { return blocks.size(); }
};

/// Levels of one variable split into {c} for c in H_j, then the complement
/// (omitted when H_j already covers every level).
inline std::vector<std::vector<Level>> variable_pieces(int d, const std::vector<Level>& Hj) {
  std::vector<bool> in(static_cast<std::size_t>(d), false);
  std::vector<std::vector<Level>> out;
  for (Level c : Hj) {
    require(c >= 0 && c < d, ErrorKind::input, "H level out of range");
    require(!in[static_cast<std::size_t>(c)], ErrorKind::input, "H lists a level twice");
    in[static_cast<std::size_t>(c)] = true;
    out.push_back({c});
  }
  std::vector<Level> rest;
  for (Level c = 0; c < d; ++c)
    if (!in[static_cast<std::size_t>(c)]) rest.push_back(c);
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

/// The product partition generated by H: prod_j (|H_j| + 1) blocks, minus
/// one factor per variable whose H_j is all of its levels.
inline Partition build_partition(const Shape& shape, HCollection H) {
  require(static_cast<int>(H.size()) == shape.p(), ErrorKind::input, "H needs one level set per variable");
  for (auto& h : H) std::sort(h.begin(), h.end());
  std::vector<std::vector<std::vector<Level>>> pieces;
  std::vector<int> counts;
  for (Var j = 0; j < shape.p(); ++j) {
    pieces.push_back(variable_pieces(shape.levels(j), H[static_cast<std::size_t>(j)]));
    counts.push_back(static_cast<int>(pieces.back().size()));
  }
  Partition part{shape, {}, std::move(H), -1, true};
  const Shape piece_shape(counts);
  for (CellCursor c(piece_shape); !c.done(); c.next()) {
    ProductEvent b(static_cast<std::size_t>(shape.p()));
    for (Var j = 0; j < shape.p(); ++j) b[static_cast<std::size_t>(j)] = pieces[static_cast<std::size_t>(j)][static_cast<std::size_t>(c[j])];
    part.blocks.push_back(std::move(b));
  }
  return part;
}

/// Merges, for each assignment of singletons to the variables outside
/// {l} and `ignored`, all blocks sharing it into one block with the l-th
/// coordinate equal to every level of l. Variables in `ignored` (the
/// independent ones) are skipped in the singleton test.
inline Partition merge_partition(const Partition& part, Var l, const std::vector<Var>& ignored = {}) {
  require(part.pristine, ErrorKind::precondition, "merge needs an unmerged product partition");
  const int p = part.shape.p();
  require(l >= 0 && l < p, ErrorKind::input, "merge variable out of range");
  std::vector<bool> skip(static_cast<std::size_t>(p), false);
  for (Var v : ignored) {
    require(v >= 0 && v < p, ErrorKind::input, "ignored variable out of range");
    skip[static_cast<std::size_t>(v)] = true;
  }
  skip[static_cast<std::size_t>(l)] = true;

  Partition out{part.shape, {}, part.H, l, false};
  std::map<ProductEvent, std::size_t> where;  // key: block with l-th coordinate cleared
  for (const auto& b : part.blocks) {
    bool singletons = true;
    for (Var j = 0; j < p; ++j)
      if (!skip[static_cast<std::size_t>(j)] && b[static_cast<std::size_t>(j)].size() != 1) singletons = false;
    if (!singletons) {
      out.blocks.push_back(b);
      continue;
    }
    ProductEvent key = b;
    key[static_cast<std::size_t>(l)].clear();
    auto it = where.find(key);
    if (it == where.end()) {
      where.emplace(key, out.blocks.size());
      out.blocks.push_back(b);
    } else {
      auto& dst = out.blocks[it->second][static_cast<std::size_t>(l)];
      dst.insert(dst.end(), b[static_cast<std::size_t>(l)].begin(), b[static_cast<std::size_t>(l)].end());
      std::sort(dst.begin(), dst.end());
    }
  }
  return out;
}

/// Replaces the listed blocks by their union, which must itself be a
/// product event. No conditional-independence rule is applied; this is the
/// general operation used to demonstrate merges that break it.
inline Partition merge_blocks(const Partition& part, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  require(indices.size() >= 2, ErrorKind::input, "merge needs at least two blocks");
  for (std::size_t i : indices) require(i < part.blocks.size(), ErrorKind::input, "block index out of range");
  const std::size_t p = static_cast<std::size_t>(part.shape.p());
  ProductEvent u(p);
  std::size_t cells = 0;
  for (std::size_t i : indices) {
    std::size_t n = 1;
    for (std::size_t j = 0; j < p; ++j) {
      const auto& s = part.blocks[i][j];
      u[j].insert(u[j].end(), s.begin(), s.end());
      n *= s.size();
    }
    cells += n;
  }
  std::size_t prod = 1;
  for (auto& s : u) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    prod *= s.size();
  }
  require(prod == cells, ErrorKind::precondition, "merged blocks do not form a product event");
  Partition out{part.shape, {}, part.H, part.merged_var, false};
  for (std::size_t i = 0; i < part.blocks.size(); ++i) {
    if (i == indices.front()) {
      out.blocks.push_back(u);
    } else if (!std::binary_search(indices.begin(), indices.end(), i)) {
      out.blocks.push_back(part.blocks[i]);
    }
  }
  return out;
}

/// Checks that the blocks are disjoint and cover every cell.
inline void check_partition(const Partition& part) {
  std::vector<unsigned char> hit(part.shape.cells(), 0);
  for (const auto& b : part.blocks) {
    require(static_cast<int>(b.size()) == part.shape.p(), ErrorKind::input, "block arity mismatch");
    for_each_cell_in(part.shape, b, [&](std::span<const Level>, std::size_t flat) {
      require(hit[flat] == 0, ErrorKind::input, "partition blocks overlap");
      hit[flat] = 1;
    });
  }
  for (unsigned char h : hit) require(h == 1, ErrorKind::input, "partition does not cover every cell");
}

struct CIReport {
  bool holds = false;
  double worst = 0.0;         // max |Pr(cell | A) - prod_j Pr(y_j = c_j | A)|
  std::size_t worst_block = 0;
};

namespace detail {

/// Per-variable conditional marginals Pr(y_j = c | A) and Pr(A).
inline std::pair<double, std::vector<Vec>> block_marginals(const NonnegTensor& pi, const ProductEvent& b) {
  const int p = pi.shape().p();
  std::vector<Vec> marg(static_cast<std::size_t>(p));
  for (Var j = 0; j < p; ++j) marg[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(pi.shape().levels(j)), 0.0);
  long double mass = 0.0L;
  for_each_cell_in(pi.shape(), b, [&](std::span<const Level> cell, std::size_t flat) {
    double v = pi[flat];
    mass += v;
    for (Var j = 0; j < p; ++j) marg[static_cast<std::size_t>(j)][static_cast<std::size_t>(cell[static_cast<std::size_t>(j)])] += v;
  });
  double m = static_cast<double>(mass);
  require(m > 0.0, ErrorKind::numeric, "partition block has zero probability");
  for (auto& v : marg)
    for (double& x : v) x /= m;
  return {m, std::move(marg)};
}

}  // namespace detail

/// Verifies that every block renders the variables conditionally independent.
/// Cells outside a block have zero conditional probability on both sides, so
/// only cells inside the block are compared.
inline CIReport verify_conditional_independence(const ProbabilityTensor& pi, const Partition& part, double tol) {
  require(pi.shape() == part.shape, ErrorKind::input, "partition and tensor shapes differ");
  check_partition(part);
  CIReport r;
  const int p = pi.shape().p();
  for (std::size_t a = 0; a < part.blocks.size(); ++a) {
    const auto& b = part.blocks[a];
    auto [mass, marg] = detail::block_marginals(pi, b);
    for_each_cell_in(pi.shape(), b, [&](std::span<const Level> cell, std::size_t flat) {
      double prod = 1.0;
      for (Var j = 0; j < p; ++j) prod *= marg[static_cast<std::size_t>(j)][static_cast<std::size_t>(cell[static_cast<std::size_t>(j)])];
      double v = std::abs(pi[flat] / mass - prod);
      if (v > r.worst) {
        r.worst = v;
        r.worst_block = a;
      }
    });
  }
  r.holds = r.worst <= tol;
  return r;
}

/// One term per block: weight Pr(A_h), arms the conditional marginals.
inline ParafacExpansion parafac_from_partition(const ProbabilityTensor& pi, const Partition& part, double tol = 1e-10) {
  CIReport ci = verify_conditional_independence(pi, part, tol);
  require(ci.holds, ErrorKind::numeric,
          "conditional independence fails on block " + std::to_string(ci.worst_block) + " (violation " + std::to_string(ci.worst) + ")");
  Vec weights;
  std::vector<std::vector<Vec>> arms;
  for (const auto& b : part.blocks) {
    auto [mass, marg] = detail::block_marginals(pi, b);
    for (auto& v : marg) {
      double s = stable_sum(v);
      for (double& x : v) x /= s;
    }
    weights.push_back(mass);
    arms.push_back(std::move(marg));
  }
  double total = stable_sum(weights);
  for (double& w : weights) w /= total;
  return ParafacExpansion(VariableScheme::from_shape(pi.shape()), std::move(weights), std::move(arms));
}

}  // namespace tensorank
