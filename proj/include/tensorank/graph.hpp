#pragma once

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/scheme.hpp"

namespace tensorank {

/// Simple undirected graph on variables 0..p-1.
class Graph {
 public:
  explicit Graph(int p = 0) : adj_(static_cast<std::size_t>(p)) {}

  Graph(int p, const std::vector<std::pair<Var, Var>>& edges) : Graph(p) {
    for (auto [a, b] : edges) add_edge(a, b);
  }

  int p() const { return static_cast<int>(adj_.size()); }

  void add_edge(Var a, Var b) {
    require(a >= 0 && b >= 0 && a < p() && b < p(), ErrorKind::input, "edge endpoint out of range");
    require(a != b, ErrorKind::input, "self loops are not allowed");
    adj_[static_cast<std::size_t>(a)].insert(b);
    adj_[static_cast<std::size_t>(b)].insert(a);
  }

  bool adjacent(Var a, Var b) const { return adj_[static_cast<std::size_t>(a)].count(b) > 0; }

  std::vector<std::pair<Var, Var>> edges() const {
    std::vector<std::pair<Var, Var>> out;
    for (Var a = 0; a < p(); ++a)
      for (Var b : adj_[static_cast<std::size_t>(a)])
        if (a < b) out.emplace_back(a, b);
    return out;
  }

  /// Every nonempty vertex set that induces a complete subgraph, ordered by
  /// size and then lexicographically. These are exactly the subsets of the
  /// graph's cliques.
  std::vector<std::vector<Var>> complete_subsets() const {
    std::vector<std::vector<Var>> out;
    std::vector<Var> cur;
    grow(cur, 0, out);
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
      return x.size() != y.size() ? x.size() < y.size() : x < y;
    });
    return out;
  }

 private:
  void grow(std::vector<Var>& cur, Var start, std::vector<std::vector<Var>>& out) const {
    for (Var v = start; v < p(); ++v) {
      bool ok = std::all_of(cur.begin(), cur.end(), [&](Var u) { return adjacent(u, v); });
      if (!ok) continue;
      cur.push_back(v);
      out.push_back(cur);
      grow(cur, v + 1, out);
      cur.pop_back();
    }
  }

  std::vector<std::set<Var>> adj_;
};

}  // namespace tensorank
