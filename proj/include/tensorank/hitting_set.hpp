#pragma once

// Enumeration of the collections H that hit every two-way interaction.
//
// Vertices are (variable, level) pairs and every nonzero two-way key is an
// edge between its two endpoints, so a hitting collection is a vertex cover.
// The search yields the inclusion-minimal covers; every cover contains one.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/loglinear.hpp"

namespace tensorank {

inline constexpr std::uint64_t kDefaultNodeCap = 1'000'000;

struct CoverSearchStats {
  std::uint64_t nodes = 0;
  std::uint64_t leaves = 0;
  std::uint64_t yielded = 0;
  bool complete = true;  // false when the node cap stopped the search
};

class CoverSearch {
 public:
  CoverSearch(int p, const std::vector<InteractionKey>& two_way) : p_(p) {
    std::map<std::pair<Var, Level>, int> ids;
    auto id_of = [&](Var v, Level l) {
      auto [it, fresh] = ids.emplace(std::make_pair(v, l), 0);
      if (fresh) it->second = static_cast<int>(ids.size()) - 1;
      return it->second;
    };
    for (const auto& k : two_way) {
      require(k.order() == 2, ErrorKind::input, "cover search takes two-way keys only");
      id_of(k.vars[0], k.levels[0]);
      id_of(k.vars[1], k.levels[1]);
    }
    // Renumber in (variable, level) order so branching is canonical.
    vertices_.reserve(ids.size());
    for (auto& [vl, id] : ids) {
      id = static_cast<int>(vertices_.size());
      vertices_.push_back(vl);
    }
    adj_.assign(vertices_.size(), {});
    for (const auto& k : two_way) {
      int a = ids.at({k.vars[0], k.levels[0]});
      int b = ids.at({k.vars[1], k.levels[1]});
      edges_.emplace_back(std::min(a, b), std::max(a, b));
      adj_[static_cast<std::size_t>(a)].push_back(b);
      adj_[static_cast<std::size_t>(b)].push_back(a);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto& n : adj_) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
  }

  /// Calls visit(H) for each minimal cover; visit returns false to stop.
  CoverSearchStats run(const std::function<bool(const HCollection&)>& visit, std::uint64_t node_cap = kDefaultNodeCap) {
    stats_ = {};
    cap_ = node_cap;
    visit_ = &visit;
    stop_ = false;
    state_.assign(vertices_.size(), kFree);
    if (edges_.empty()) {
      ++stats_.leaves;
      emit();
      return stats_;
    }
    branch();
    return stats_;
  }

 private:
  enum : signed char { kFree = 0, kIn = 1, kOut = -1 };

  void branch() {
    if (stop_) return;
    if (++stats_.nodes > cap_) {
      stats_.complete = false;
      stop_ = true;
      return;
    }
    const std::pair<int, int>* open = nullptr;
    for (const auto& e : edges_)
      if (state_[static_cast<std::size_t>(e.first)] != kIn && state_[static_cast<std::size_t>(e.second)] != kIn) {
        open = &e;
        break;
      }
    if (!open) {
      ++stats_.leaves;
      if (minimal()) emit();
      return;
    }
    // Lower endpoint if still free, otherwise the other one (the lower one
    // was excluded, which forces the other in).
    int u = state_[static_cast<std::size_t>(open->first)] == kFree ? open->first : open->second;
    if (state_[static_cast<std::size_t>(u)] != kFree) return;  // both excluded: dead branch

    state_[static_cast<std::size_t>(u)] = kIn;
    branch();
    state_[static_cast<std::size_t>(u)] = kFree;
    if (stop_) return;

    // u out: all of its neighbours must be in.
    std::vector<int> forced;
    bool ok = true;
    for (int v : adj_[static_cast<std::size_t>(u)]) {
      auto s = state_[static_cast<std::size_t>(v)];
      if (s == kOut) {
        ok = false;
        break;
      }
      if (s == kFree) forced.push_back(v);
    }
    if (ok) {
      state_[static_cast<std::size_t>(u)] = kOut;
      for (int v : forced) state_[static_cast<std::size_t>(v)] = kIn;
      branch();
      for (int v : forced) state_[static_cast<std::size_t>(v)] = kFree;
      state_[static_cast<std::size_t>(u)] = kFree;
    }
  }

  bool minimal() const {
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (state_[v] != kIn) continue;
      bool private_edge = false;
      for (int w : adj_[v])
        if (state_[static_cast<std::size_t>(w)] != kIn) {
          private_edge = true;
          break;
        }
      if (!private_edge) return false;
    }
    return true;
  }

  void emit() {
    HCollection H(static_cast<std::size_t>(p_));
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      if (state_[v] == kIn) H[static_cast<std::size_t>(vertices_[v].first)].push_back(vertices_[v].second);
    ++stats_.yielded;
    if (!(*visit_)(H)) stop_ = true;
  }

  int p_;
  std::vector<std::pair<Var, Level>> vertices_;
  std::vector<std::vector<int>> adj_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<signed char> state_;
  CoverSearchStats stats_;
  std::uint64_t cap_ = kDefaultNodeCap;
  const std::function<bool(const HCollection&)>* visit_ = nullptr;
  bool stop_ = false;
};

/// True when H hits every key of `keys` (some member level lies in H_j).
inline bool hits_all(const HCollection& H, const std::vector<InteractionKey>& keys) {
  for (const auto& k : keys) {
    bool hit = false;
    for (std::size_t t = 0; t < k.order() && !hit; ++t) {
      const auto& h = H[static_cast<std::size_t>(k.vars[t])];
      hit = std::find(h.begin(), h.end(), k.levels[t]) != h.end();
    }
    if (!hit) return false;
  }
  return true;
}

/// Minimal members of the hitting collection, in search order.
inline std::vector<HCollection> enumerate_H(const SupportSummary& s, int p, std::uint64_t node_cap = kDefaultNodeCap,
                                            CoverSearchStats* stats = nullptr) {
  std::vector<HCollection> out;
  CoverSearch search(p, s.two_way);
  CoverSearchStats st = search.run([&](const HCollection& H) {
    out.push_back(H);
    return true;
  }, node_cap);
  if (stats) *stats = st;
  if (out.empty()) fail(ErrorKind::cap_exceeded, "node cap reached before any hitting collection was found");
  return out;
}

}  // namespace tensorank
