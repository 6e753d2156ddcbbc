#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tensorank/graph.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/random.hpp"
#include "tensorank/reference_models.hpp"
#include "tensorank/tensor.hpp"

using namespace tensorank;

TEST(Scheme, FlatAndUnflattenAgree) {
  VariableScheme s({2, 3, 4});
  EXPECT_EQ(s.cells(), 24u);
  std::size_t seen = 0;
  for (CellCursor c(s); !c.done(); c.next()) {
    EXPECT_EQ(s.flat(c.cell()), c.flat());
    EXPECT_EQ(s.unflatten(c.flat()), c.cell());
    ++seen;
  }
  EXPECT_EQ(seen, 24u);
  // last variable varies fastest
  EXPECT_EQ(s.stride(2), 1u);
  EXPECT_EQ(s.stride(0), 12u);
}

TEST(Scheme, RejectsBadLevelsAndCap) {
  try {
    VariableScheme s(std::vector<int>{2, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
  }
  try {
    VariableScheme s(std::vector<int>(40, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::cap_exceeded);
  }
}

TEST(Tensor, ProbabilityTensorChecksMass) {
  Shape sh({2, 2});
  EXPECT_THROW(ProbabilityTensor(sh, {0.5, 0.5, 0.5, 0.5}), Error);
  EXPECT_THROW(NonnegTensor(sh, {0.5, -0.1, 0.5, 0.1}), Error);
  ProbabilityTensor u = ProbabilityTensor::uniform(sh);
  EXPECT_NEAR(u.sum(), 1.0, 1e-15);
  auto n = ProbabilityTensor::normalized(NonnegTensor(sh, {1, 2, 3, 4}));
  EXPECT_NEAR(n[3], 0.4, 1e-15);
}

TEST(Tensor, MarginalSumsOut) {
  Shape sh({2, 3});
  ProbabilityTensor pi = ProbabilityTensor::normalized(NonnegTensor(sh, {1, 2, 3, 4, 5, 6}));
  ProbabilityTensor m0 = marginal(pi, {0});
  EXPECT_NEAR(m0[0], 6.0 / 21, 1e-15);
  EXPECT_NEAR(m0[1], 15.0 / 21, 1e-15);
  ProbabilityTensor m1 = marginal(pi, {1});
  EXPECT_NEAR(m1[2], 9.0 / 21, 1e-15);
}

TEST(Random, DeterministicAndIndependentStreams) {
  Rng a = make_rng(42), b = make_rng(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(uniform01(a), uniform01(b));
  EXPECT_NE(derive_seed(42, 0), derive_seed(42, 1));
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(Random, DirichletOnSimplexAndStickWeights) {
  Rng r = make_rng(1);
  std::vector<double> a(5, 0.3);
  for (int t = 0; t < 100; ++t) {
    auto v = dirichlet(r, a);
    double s = 0;
    for (double x : v) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  std::vector<double> frac{0.5, 0.5, 1.0};
  auto w = stick_weights(frac);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.25);
  EXPECT_DOUBLE_EQ(w[2], 0.25);
}

TEST(Random, GammaAndBetaMeans) {
  Rng r = make_rng(5);
  double sg = 0, sb = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    sg += gamma_rate(r, 0.5, 2.0);
    sb += beta_variate(r, 2.0, 3.0);
  }
  EXPECT_NEAR(sg / n, 0.25, 0.01);
  EXPECT_NEAR(sb / n, 0.4, 0.01);
}

namespace {

// theta_E(levels) by inclusion-exclusion over the subsets of E.
double mobius(const ProbabilityTensor& pi, const InteractionKey& k) {
  const std::size_t n = k.order();
  double acc = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::vector<Level> cell(static_cast<std::size_t>(pi.shape().p()), 0);
    for (std::size_t t = 0; t < n; ++t)
      if (mask >> t & 1U) cell[static_cast<std::size_t>(k.vars[t])] = k.levels[t];
    int sign = ((n - static_cast<std::size_t>(std::popcount(mask))) % 2) ? -1 : 1;
    acc += sign * std::log(pi.at(cell));
  }
  return acc;
}

}  // namespace

TEST(LogLinear, RoundTripAndMobius) {
  Rng r = make_rng(9);
  for (int t = 0; t < 20; ++t) {
    LogLinearModel m = random_weakly_hierarchical(r);
    ProbabilityTensor pi = tensor_from_loglinear(m).pi;
    LogLinearModel back = theta_from_tensor(pi, 1e-10);
    EXPECT_NEAR(back.theta0(), m.theta0(), 1e-10);
    EXPECT_EQ(back.size(), m.size());
    for (const auto& [k, v] : m.terms()) {
      EXPECT_NEAR(back.get(k), v, 1e-10);
      EXPECT_NEAR(mobius(pi, k), v, 1e-10);
    }
  }
}

TEST(LogLinear, CornerBaselineIsTheta0) {
  Rng r = make_rng(3);
  LogLinearModel m = example_cross_model(4, r);
  ProbabilityTensor pi = tensor_from_loglinear(m).pi;
  EXPECT_NEAR(std::log(pi[0]), m.theta0(), 1e-12);
}

TEST(LogLinear, ValidateKeys) {
  LogLinearModel m(VariableScheme(2, 3));
  EXPECT_THROW(m.set(InteractionKey{{0}, {0}}, 1.0), Error);     // baseline level
  EXPECT_THROW(m.set(InteractionKey{{1, 0}, {1, 1}}, 1.0), Error);  // unsorted
  EXPECT_THROW(m.set(InteractionKey{{0, 2}, {1, 1}}, 1.0), Error);  // var out of range
  m.set(InteractionKey{{0}, {1}}, 0.5);
  EXPECT_THROW(m.insert_new(InteractionKey{{0}, {1}}, 0.7), Error);
  m.set(InteractionKey{{0}, {1}}, 0.0);
  EXPECT_EQ(m.size(), 0u);
}

TEST(LogLinear, HierarchyChecks) {
  LogLinearModel m(VariableScheme(3, 3));
  m.set(InteractionKey{{0, 1}, {1, 2}}, 0.4);
  EXPECT_FALSE(is_weakly_hierarchical(m));
  EXPECT_TRUE(is_weakly_hierarchical(m, {true}));
  m.set(InteractionKey{{0}, {1}}, 0.1);
  m.set(InteractionKey{{1}, {2}}, 0.1);
  EXPECT_TRUE(is_weakly_hierarchical(m));
  EXPECT_TRUE(is_hierarchical(m));
  // three-way on (0,1,2) with faces only on (0,1): weakly hierarchical fails
  m.set(InteractionKey{{0, 1, 2}, {1, 2, 1}}, 0.2);
  EXPECT_FALSE(is_weakly_hierarchical(m));
  EXPECT_FALSE(is_hierarchical(m));
}

TEST(LogLinear, SupportSummary) {
  Rng r = make_rng(4);
  LogLinearModel m = example_cross_model(5, r);
  SupportSummary s = support_summary(m);
  EXPECT_TRUE(s.two_way_sufficient);
  EXPECT_EQ(s.two_way.size(), 7u);  // 4 + 4 - 1 shared (1,1)
  EXPECT_EQ(s.active.size(), 2u);
  EXPECT_TRUE(s.independent.empty());
  EXPECT_EQ(s.interacting_levels[0].size(), 4u);
}

TEST(Graph, CompleteSubsetsOfTriangleAndEdge) {
  Graph g(4, {{0, 1}, {1, 2}, {0, 2}});
  auto cs = g.complete_subsets();
  std::set<std::vector<Var>> got(cs.begin(), cs.end());
  EXPECT_TRUE(got.count({0, 1, 2}));
  EXPECT_TRUE(got.count({0, 1}));
  EXPECT_TRUE(got.count({3}));
  EXPECT_FALSE(got.count({0, 3}));
  EXPECT_THROW(g.add_edge(1, 1), Error);
}

TEST(LogLinear, RandomModelFromGraphRespectsEdges) {
  Rng r = make_rng(8);
  VariableScheme s(4, 3);
  Graph g(4, {{0, 1}, {2, 3}});
  LogLinearModel m = random_model_from_graph(s, g, 1.0, r);
  for (const auto& [k, v] : m.terms()) {
    if (k.order() < 2) continue;
    ASSERT_EQ(k.order(), 2u);
    EXPECT_TRUE(g.adjacent(k.vars[0], k.vars[1]));
  }
  EXPECT_TRUE(is_hierarchical(m));
}
