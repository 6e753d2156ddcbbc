#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "tensorank/hitting_set.hpp"
#include "tensorank/io.hpp"
#include "tensorank/partition.hpp"
#include "tensorank/rank_bounds.hpp"
#include "tensorank/reference_models.hpp"

using namespace tensorank;

namespace {

// Ordering bound over all permutations, straight from the two-way keys.
Count ordering_brute(const LogLinearModel& m) {
  const int p = m.scheme().p();
  std::vector<Var> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  Count best = kCountMax;
  do {
    Count prod = 1;
    for (int t = 0; t + 1 < p; ++t) {
      Var v = perm[static_cast<std::size_t>(t)];
      std::set<Level> B;
      for (const auto& [k, val] : m.terms()) {
        if (k.order() != 2) continue;
        for (int u = 0; u < 2; ++u) {
          Var other = k.vars[static_cast<std::size_t>(1 - u)];
          bool later = std::find(perm.begin() + t + 1, perm.end(), other) != perm.end();
          if (k.vars[static_cast<std::size_t>(u)] == v && later) B.insert(k.levels[static_cast<std::size_t>(u)]);
        }
      }
      prod *= static_cast<Count>(B.size()) + 1;
    }
    best = std::min(best, prod);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Every H with H_j a subset of the non-baseline levels of j.
template <class F>
void each_H(const VariableScheme& s, F&& f) {
  const int p = s.p();
  std::vector<std::uint32_t> mask(static_cast<std::size_t>(p), 0);
  while (true) {
    HCollection H(static_cast<std::size_t>(p));
    for (Var j = 0; j < p; ++j)
      for (Level c = 1; c < s.levels(j); ++c)
        if (mask[static_cast<std::size_t>(j)] >> (c - 1) & 1U) H[static_cast<std::size_t>(j)].push_back(c);
    f(H);
    Var j = 0;
    for (; j < p; ++j) {
      auto& mj = mask[static_cast<std::size_t>(j)];
      if (++mj < (1U << (s.levels(j) - 1))) break;
      mj = 0;
    }
    if (j == p) break;
  }
}

std::vector<LogLinearModel> small_models(int count, std::uint64_t seed) {
  Rng r = make_rng(seed);
  RandomModelConfig cfg;
  cfg.max_p = 3;
  cfg.max_d = 3;
  std::vector<LogLinearModel> out;
  while (static_cast<int>(out.size()) < count) {
    LogLinearModel m = random_weakly_hierarchical(r, cfg);
    if (!support_summary(m).two_way.empty()) out.push_back(m);
  }
  return out;
}

}  // namespace

TEST(OrderingBound, MatchesPermutationBruteForce) {
  Rng r = make_rng(11);
  RandomModelConfig cfg;
  cfg.max_p = 5;
  cfg.max_d = 3;
  for (int t = 0; t < 40; ++t) {
    LogLinearModel m = random_weakly_hierarchical(r, cfg);
    OrderingBound res = ordering_bound(m);
    EXPECT_EQ(res.value, ordering_brute(m)) << format_model(m);
    EXPECT_EQ(static_cast<int>(res.sigma.size()), m.scheme().p());
    Count check = 1;
    for (const auto& B : res.B) check *= static_cast<Count>(B.size()) + 1;
    EXPECT_EQ(check, res.value);
  }
}

TEST(OrderingBound, GreedyIsAnUpperBound) {
  Rng r = make_rng(12);
  for (int t = 0; t < 20; ++t) {
    LogLinearModel m = random_weakly_hierarchical(r);
    EXPECT_GE(ordering_bound(m, PermutationSearch::greedy).value, ordering_bound(m).value);
  }
}

TEST(OrderingBound, RejectsNonWeaklyHierarchical) {
  LogLinearModel m(VariableScheme(2, 3));
  m.set(InteractionKey{{0, 1}, {1, 1}}, 0.5);
  try {
    ordering_bound(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
  EXPECT_NO_THROW(ordering_bound(m, PermutationSearch::exhaustive, {true}));
}

TEST(CoverBounds, MatchBruteForceOverAllH) {
  for (const auto& m : small_models(40, 13)) {
    SupportSummary s = support_summary(m);
    const auto& sc = m.scheme();
    Count b11 = kCountMax, b13 = kCountMax, btk = kCountMax;
    each_H(sc, [&](const HCollection& H) {
      if (!hits_all(H, s.two_way)) return;
      b11 = std::min(b11, cover_value(H, s.active));
      btk = std::min(btk, tucker_value(H, s.active));
      for (Var l : s.active) b13 = std::min(b13, tight_value(H, s.active, sc.dims(), l));
    });
    CoverBoundsReport rep = cover_bounds(m);
    EXPECT_EQ(rep.cover.value, b11) << format_model(m);
    EXPECT_EQ(rep.tight.value, b13) << format_model(m);
    EXPECT_EQ(rep.tucker.value, btk) << format_model(m);
    EXPECT_TRUE(hits_all(rep.cover.H, s.two_way));
    EXPECT_TRUE(hits_all(rep.tight.H, s.two_way));
  }
}

TEST(CoverBounds, EnumeratedCoversAreMinimal) {
  for (const auto& m : small_models(20, 14)) {
    SupportSummary s = support_summary(m);
    for (const auto& H : enumerate_H(s, m.scheme().p())) {
      ASSERT_TRUE(hits_all(H, s.two_way));
      for (std::size_t j = 0; j < H.size(); ++j)
        for (std::size_t t = 0; t < H[j].size(); ++t) {
          HCollection smaller = H;
          smaller[j].erase(smaller[j].begin() + static_cast<long>(t));
          EXPECT_FALSE(hits_all(smaller, s.two_way));
        }
    }
  }
}

TEST(KnownValues, CrossExample) {
  Rng r = make_rng(1);
  LogLinearModel m = example_cross_model(6, r);
  CoverBoundsReport rep = cover_bounds(m);
  EXPECT_EQ(ordering_bound(m).value, 6);
  EXPECT_EQ(rep.cover.value, 4);
  EXPECT_EQ(rep.tight.value, 3);
  EXPECT_EQ(rep.tucker.value, 2);
}

TEST(KnownValues, ThreeWayExampleAtD2) {
  Rng r = make_rng(2);
  LogLinearModel m = example_three_way_model(2, r);
  EXPECT_EQ(ordering_bound(m).value, 4);
}

TEST(KnownValues, SaturatedBinaryAndNoInteractions) {
  Rng r = make_rng(3);
  LogLinearModel sat = saturated_model(VariableScheme(3, 2), r);
  EXPECT_EQ(ordering_bound(sat).value, 4);
  EXPECT_EQ(cover_bounds(sat).tucker.value, 2);
  LogLinearModel mains(VariableScheme(4, 3));
  mains.set(InteractionKey{{2}, {1}}, 0.3);
  CoverBoundsReport rep = cover_bounds(mains);
  EXPECT_EQ(ordering_bound(mains).value, 1);
  EXPECT_EQ(rep.cover.value, 1);
  EXPECT_EQ(rep.tight.value, 1);
  EXPECT_EQ(rep.tucker.value, 1);
}

TEST(StructuralBounds, StarAndClique) {
  Rng r = make_rng(4);
  VariableScheme s(7, 2);
  LogLinearModel star = random_model_from_graph(s, figure_graph(1), 1.0, r);
  StructuralBounds c = structural_bounds(star, std::vector<Var>{6});
  EXPECT_EQ(c.m, 2);
  ASSERT_TRUE(c.conditional.applies);
  EXPECT_EQ(c.conditional.value, 2);
  EXPECT_FALSE(c.marginal.applies);

  LogLinearModel clique = random_model_from_graph(s, figure_graph(2), 1.0, r);
  StructuralBounds d = structural_bounds(clique, std::vector<Var>{0, 1, 2, 3});
  ASSERT_TRUE(d.marginal.applies);
  EXPECT_EQ(d.marginal.value, 16);
  EXPECT_EQ(d.few_levels.value, 64);
}

TEST(Partition, ProductPartitionBlockCount) {
  Shape sh({3, 4, 2});
  HCollection H{{1}, {1, 2}, {}};
  Partition part = build_partition(sh, H);
  // 2 * 3 * 1 blocks
  EXPECT_EQ(part.size(), 6u);
  EXPECT_NO_THROW(check_partition(part));
  HCollection full{{1, 2}, {}, {1}};
  // H_j holding every non-baseline level leaves the singleton {0}
  EXPECT_EQ(build_partition(sh, full).size(), 3u * 1 * 2);
}

TEST(Partition, CrossExampleMergeAndReconstruction) {
  Rng r = make_rng(5);
  LogLinearModel m = example_cross_model(5, r);
  ProbabilityTensor pi = tensor_from_loglinear(m).pi;
  Partition part = build_partition(pi.shape(), HCollection{{1}, {1}});
  EXPECT_EQ(part.size(), 4u);
  Partition merged = merge_partition(part, 1);
  EXPECT_EQ(merged.size(), 3u);
  EXPECT_NO_THROW(check_partition(merged));
  CIReport ci = verify_conditional_independence(pi, merged, 1e-12);
  EXPECT_TRUE(ci.holds) << ci.worst;
  ProbabilityTensor back = eval_parafac(parafac_from_partition(pi, merged));
  EXPECT_LT(back.max_abs_diff(pi), 1e-12);
  EXPECT_THROW(merge_partition(merged, 0), Error);
}

TEST(Partition, NonCoverBreaksCI) {
  Rng r = make_rng(6);
  LogLinearModel m = example_cross_model(4, r);
  ProbabilityTensor pi = tensor_from_loglinear(m).pi;
  Partition part = build_partition(pi.shape(), HCollection{{}, {}});
  EXPECT_FALSE(verify_conditional_independence(pi, part, 1e-12).holds);
  EXPECT_THROW(parafac_from_partition(pi, part), Error);
}

TEST(Partition, MergeBlocksNeedsProductEvent) {
  Shape sh({3, 3});
  Partition part = build_partition(sh, HCollection{{1}, {1}});
  // blocks {1}x{1} and {not 1}x{not 1} do not form a product
  std::size_t a = 0, b = 0;
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (part.blocks[i][0].size() == 1 && part.blocks[i][1].size() == 1) a = i;
    if (part.blocks[i][0].size() == 2 && part.blocks[i][1].size() == 2) b = i;
  }
  try {
    merge_blocks(part, {a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(Partition, TightPartitionHasTightBoundBlocks) {
  for (const auto& m : small_models(30, 15)) {
    CoverBoundsReport rep = cover_bounds(m);
    ProbabilityTensor pi = tensor_from_loglinear(m).pi;
    Partition tight = tight_partition(pi.shape(), rep.tight, rep.support.independent);
    EXPECT_EQ(static_cast<Count>(tight.size()), rep.tight.value) << format_model(m);
    EXPECT_TRUE(verify_conditional_independence(pi, tight, 1e-12).holds) << format_model(m);
  }
}

TEST(Partition, TrivialPartitionOfProductTensor) {
  LogLinearModel m(VariableScheme({2, 3, 3}));
  m.set(InteractionKey{{1}, {2}}, 0.8);
  m.set(InteractionKey{{2}, {1}}, -0.4);
  ProbabilityTensor pi = tensor_from_loglinear(m).pi;
  Partition part = build_partition(pi.shape(), HCollection(3));
  ASSERT_EQ(part.size(), 1u);
  ParafacExpansion e = parafac_from_partition(pi, part);
  EXPECT_EQ(e.terms(), 1u);
  EXPECT_LT(eval_parafac(e).max_abs_diff(pi), 1e-15);
}
