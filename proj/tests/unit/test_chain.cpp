#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tensorank/chain.hpp"
#include "tensorank/studies.hpp"
#include "tensorank/summary.hpp"

using namespace tensorank;
namespace fs = std::filesystem;

namespace {

Dataset small_data(std::uint64_t seed, int n = 60) {
  Rng r = make_rng(seed);
  VariableScheme s({2, 3, 2, 3});
  Graph g(4, {{0, 1}});
  LogLinearModel m = random_model_from_graph(s, g, 1.0, r);
  return sample_cells(tensor_from_loglinear(m).pi, n, r);
}

Hyperparameters small_hp() {
  Hyperparameters hp;
  hp.m = 3;
  hp.k = 2;
  return hp;
}

void expect_same_trace(const ChainTrace& a, const ChainTrace& b) {
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    const auto& x = a.snapshots[i];
    const auto& y = b.snapshots[i];
    EXPECT_EQ(x.iteration, y.iteration);
    EXPECT_EQ(x.groups, y.groups);
    EXPECT_EQ(x.w_counts, y.w_counts);
    EXPECT_EQ(x.lambda, y.lambda);
    EXPECT_EQ(x.nu, y.nu);
    EXPECT_EQ(x.beta, y.beta);
  }
}

fs::path temp_file(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "tensorank_unit";
  fs::create_directories(d);
  fs::path f = d / name;
  fs::remove(f);
  return f;
}

}  // namespace

TEST(Sampler, InvariantsHoldEverySweep) {
  Dataset data = small_data(31);
  for (bool learn : {true, false}) {
    Hyperparameters hp = small_hp();
    if (!learn) hp.fixed_groups = {0, 0, 1, 1};
    Rng r = make_rng(1);
    CTuckerState st = init_state(data, hp, r);
    for (int t = 0; t < 50; ++t) {
      gibbs_sweep(st, data, hp, r, true);
      ASSERT_NO_THROW(check_state(st, data, hp));
    }
    if (!learn) {
      EXPECT_EQ(st.groups, hp.fixed_groups);
    }
    ProbabilityTensor pi = eval_ctucker(implied_expansion(st, data.scheme));
    EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
  }
}

TEST(Sampler, ArmConcentrationSchedules) {
  EXPECT_DOUBLE_EQ(arm_concentration(ArmSchedule::flat, 0, 4), arm_concentration(ArmSchedule::flat, 3, 4));
  EXPECT_GT(arm_concentration(ArmSchedule::decreasing, 0, 4), arm_concentration(ArmSchedule::decreasing, 3, 4));
  EXPECT_EQ(parse_arm_schedule("flat"), ArmSchedule::flat);
  EXPECT_THROW(parse_arm_schedule("steep"), Error);
}

TEST(Chain, ScheduleSnapshots) {
  ChainSchedule s{10, 30, 4};
  EXPECT_EQ(s.snapshot_count(), 5);
  EXPECT_FALSE(s.snapshot_at(10));
  EXPECT_TRUE(s.snapshot_at(14));
  EXPECT_THROW((ChainSchedule{10, 5, 1}.validate()), Error);
}

TEST(Chain, SameSeedSameTrace) {
  Dataset data = small_data(32);
  ChainSchedule s{20, 60, 2};
  ChainTrace a = run_chain(data, small_hp(), s, 77), b = run_chain(data, small_hp(), s, 77);
  EXPECT_EQ(static_cast<long>(a.snapshots.size()), s.snapshot_count());
  expect_same_trace(a, b);
  ChainTrace c = run_chain(data, small_hp(), s, 78);
  EXPECT_NE(a.snapshots.back().lambda, c.snapshots.back().lambda);
}

TEST(Chain, ResumeMatchesUninterrupted) {
  Dataset data = small_data(33);
  ChainSchedule s{20, 80, 3};
  ChainTrace full = run_chain(data, small_hp(), s, 5);
  fs::path ck = temp_file("resume.ckpt");
  ChainOptions first;
  first.checkpoint_path = ck.string();
  first.stop_after = 37;
  ChainTrace part = run_chain(data, small_hp(), s, 5, first);
  ASSERT_TRUE(fs::exists(ck));
  ChainOptions second;
  second.checkpoint_path = ck.string();
  second.resume = true;
  ChainTrace rest = run_chain(data, small_hp(), s, 5, second);
  expect_same_trace(full, rest);
  EXPECT_LT(part.snapshots.size(), full.snapshots.size());
}

TEST(Chain, CheckpointMismatchAndCorruption) {
  Dataset data = small_data(34);
  ChainSchedule s{5, 20, 1};
  fs::path ck = temp_file("bad.ckpt");
  ChainOptions o;
  o.checkpoint_path = ck.string();
  run_chain(data, small_hp(), s, 1, o);
  o.resume = true;
  try {
    run_chain(data, small_hp(), s, 2, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
  }
  std::ofstream(ck) << "tensorank-checkpoint 1 seed banana";
  try {
    run_chain(data, small_hp(), s, 1, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
  }
}

TEST(Summary, CramersVExtremes) {
  Shape sh({3, 3});
  EXPECT_NEAR(cramers_v(ProbabilityTensor::uniform(sh), 0, 1).value, 0.0, 1e-15);
  ProbabilityTensor diag(sh, {1.0 / 3, 0, 0, 0, 1.0 / 3, 0, 0, 0, 1.0 / 3});
  EXPECT_NEAR(cramers_v(diag, 0, 1).value, 1.0, 1e-12);
  ProbabilityTensor dead(sh, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0});
  CramersV v = cramers_v(dead, 0, 1);
  EXPECT_TRUE(v.zero_margin);
  EXPECT_NEAR(v.value, 1.0, 1e-12);
}

TEST(Summary, QuantileType7) {
  std::vector<double> xs{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Summary, CanonicalGroups) {
  EXPECT_EQ(canonical_groups({2, 0, 2, 1}), (std::vector<int>{0, 1, 0, 2}));
  EXPECT_EQ(occupied_groups({2, 0, 2, 1}), 3);
  EXPECT_EQ(occupancy_threshold(100, SummaryOptions{}), 2);
  EXPECT_EQ(occupancy_threshold(1000, SummaryOptions{}), 5);
}

TEST(Summary, CoreRankProbabilityCountsOccupiedComponents) {
  Dataset data = small_data(35, 100);
  ChainTrace tr = run_chain(data, small_hp(), ChainSchedule{5, 15, 1}, 3);
  for (auto& s : tr.snapshots) s.w_counts = {100, 0};
  EXPECT_DOUBLE_EQ(posterior_summary(tr, data.scheme).core_rank_prob, 0.0);
  for (auto& s : tr.snapshots) s.w_counts = {99, 1};
  EXPECT_DOUBLE_EQ(posterior_summary(tr, data.scheme).core_rank_prob, 0.0);
  for (auto& s : tr.snapshots) s.w_counts = {98, 2};
  PosteriorSummary ps = posterior_summary(tr, data.scheme);
  EXPECT_DOUBLE_EQ(ps.core_rank_prob, 1.0);
  // 6 main-effect keys, 13 two-way keys
  EXPECT_EQ(ps.theta_intervals.size(), 19u);
}

TEST(Studies, SampleCellsMatchesProbabilities) {
  Rng r = make_rng(36);
  Shape sh({2, 2});
  ProbabilityTensor pi(sh, {0.1, 0.2, 0.0, 0.7});
  Dataset d = sample_cells(pi, 20000, r);
  std::vector<double> c(4, 0.0);
  for (int i = 0; i < d.n; ++i) c[static_cast<std::size_t>(d.at(i, 0) * 2 + d.at(i, 1))] += 1.0;
  EXPECT_EQ(c[2], 0.0);
  EXPECT_NEAR(c[0] / d.n, 0.1, 0.01);
  EXPECT_NEAR(c[3] / d.n, 0.7, 0.01);
}

TEST(Studies, HistogramEdgesAndCounts) {
  Histogram h = histogram({0.0, 0.1, 0.5, 0.99, 1.0, 2.0}, 2, 0.0, 1.0);
  ASSERT_EQ(h.edges.size(), 3u);
  EXPECT_DOUBLE_EQ(h.edges[1], 0.5);
  EXPECT_EQ(h.counts[0], 2);
  EXPECT_EQ(h.counts[1], 3);  // upper edge is inclusive, 2.0 dropped
}

TEST(Studies, CoverageReport) {
  VariableScheme s(2, 2);
  LogLinearModel truth(s);
  InteractionKey k{{0, 1}, {1, 1}};
  truth.set(k, 0.5);
  PosteriorSummary ps;
  ps.theta_intervals[k] = Interval{0.4, 0.1, 0.6};
  CoverageReport rep = coverage_report(ps, truth);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_TRUE(rep.rows[0].covered);
  ps.theta_intervals[k] = Interval{0.0, -0.2, 0.2};
  EXPECT_DOUBLE_EQ(coverage_report(ps, truth).coverage, 0.0);
}

TEST(Studies, PriorStudyDeterministic) {
  PriorStudyConfig cfg;
  cfg.p = 2;
  cfg.d = 4;
  cfg.m = 3;
  cfg.n_draws = 50;
  PriorStudyResult a = induced_prior_study(cfg, 9), b = induced_prior_study(cfg, 9);
  ASSERT_EQ(a.draws.size(), 50u);
  EXPECT_EQ(a.column_l1(2), b.column_l1(2));
  EXPECT_EQ(a.representative_keys[1].vars, (std::vector<Var>{0, 1}));
}

TEST(Sampler, SingleClassEverythingIsFixed) {
  Dataset data{VariableScheme(std::vector<int>{3}), 1, {2}};
  Hyperparameters hp;
  hp.m = 1;
  hp.k = 1;
  Rng r = make_rng(2);
  CTuckerState st = init_state(data, hp, r);
  for (int t = 0; t < 5; ++t) gibbs_sweep(st, data, hp, r, true);
  EXPECT_EQ(st.w, std::vector<int>{0});
  EXPECT_EQ(st.z, std::vector<int>{0});
  EXPECT_EQ(st.groups, std::vector<int>{0});
}

TEST(Sampler, StickStepMoments) {
  // counts 3 and 7 with beta = 1: the first stick is Beta(4, 8)
  Dataset data = small_data(37, 10);
  Hyperparameters hp = small_hp();
  Rng r = make_rng(3);
  CTuckerState st = init_state(data, hp, r);
  st.w = {0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
  st.beta = 1.0;
  const int draws = 40000;
  double s = 0, s2 = 0;
  for (int t = 0; t < draws; ++t) {
    step_nu(st, data, hp, r);
    s += st.nu_star[0];
    s2 += st.nu_star[0] * st.nu_star[0];
  }
  double mean = s / draws, var = s2 / draws - mean * mean;
  EXPECT_NEAR(mean, 4.0 / 12.0, 0.005);
  EXPECT_NEAR(var, 32.0 / (144.0 * 13.0), 0.001);
}

TEST(Chain, NoIterationsAfterBurnInGivesEmptyTrace) {
  Dataset data = small_data(38);
  ChainTrace t = run_chain(data, small_hp(), ChainSchedule{15, 15, 1}, 1);
  EXPECT_TRUE(t.snapshots.empty());
  EXPECT_THROW(posterior_summary(t, data.scheme), Error);
}
