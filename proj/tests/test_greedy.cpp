#include <gtest/gtest.h>

#include "fixture.hpp"

using namespace frbm;

TEST(ParameterGrids, TrainingAndTestAreDisjoint) {
  const ParameterRange r;
  const auto train1 = training_grid(Subdomain::D1, r, 257);
  ASSERT_EQ(train1.size(), 257u);
  EXPECT_EQ(train1.front().s, 0.03);
  EXPECT_EQ(train1.back().s, 0.5);
  const auto test1 = test_grid(Subdomain::D1, r, 100, 1, train1);
  EXPECT_GE(test1.size(), 90u);
  for (const auto& t : test1) {
    EXPECT_GT(t.s, 0.03);
    EXPECT_LT(t.s, 0.5);
    for (const auto& x : train1) EXPECT_FALSE(std::abs(x.s - t.s) < 1e-12 && x.nu == t.nu);
  }
  // Interior points that coincide with training points are dropped.
  const auto clash = test_grid(Subdomain::D2, r, 31, 1, training_grid(Subdomain::D2, r, 33));
  EXPECT_EQ(clash.size(), 0u);
}

TEST(ParameterGrids, TensorGrid) {
  const ParameterRange r;
  const auto g = training_grid(Subdomain::D2, r, 33, 33);
  ASSERT_EQ(g.size(), 33u * 33u);
  EXPECT_EQ(g[0].nu, 0.0);
  EXPECT_EQ(g[32].nu, 1.0);
  EXPECT_EQ(g[33].s, g[34].s);
  const auto t = test_grid(Subdomain::D2, r, 12, 12, g);
  EXPECT_EQ(t.size(), 144u);
  for (const auto& p : t) EXPECT_TRUE(p.nu > 0.0 && p.nu < 1.0);
}

TEST(ParameterGrids, NearestParameter) {
  const std::vector<Parameter> set{{0.1, 0.0}, {0.2, 0.5}, {0.4, 1.0}};
  EXPECT_EQ(nearest_parameter(set, {0.21, 0.4}), 1u);
  EXPECT_EQ(nearest_parameter(set, {0.5, 0.9}), 2u);
}

TEST(Greedy, StartsNearestTheMiddle) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D1, 6, 8);
  const GreedyResult r = fixture::train(p, 2);
  EXPECT_NEAR(r.model.mu_snapshots[0].s, p.training[16].s, 1e-15);
}

TEST(Greedy, SeededRandomStartIsReproducible) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D2, 6, 8);
  GreedyOptions opt;
  opt.n_max = 3;
  opt.random_first = true;
  opt.seed = 42;
  const GreedyResult a = greedy_offline(*p.op, p.loads, p.rhs, p.training, opt);
  const GreedyResult b = greedy_offline(*p.op, p.loads, p.rhs, p.training, opt);
  EXPECT_EQ(a.model.mu_snapshots, b.model.mu_snapshots);
  EXPECT_EQ(a.model.reduced_ops[0], b.model.reduced_ops[0]);
  opt.seed = 43;
  const GreedyResult c = greedy_offline(*p.op, p.loads, p.rhs, p.training, opt);
  EXPECT_NE(a.model.mu_snapshots[0], c.model.mu_snapshots[0]);
}

TEST(Greedy, SingleSnapshotModel) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D1, 6, 8);
  const GreedyResult r = fixture::train(p, 1);
  ASSERT_EQ(r.model.size(), 1u);
  ASSERT_EQ(r.history.size(), 1u);
  const Parameter mu = r.model.mu_snapshots[0];
  const Field2D truth = p.truth->trace_bottom(fixture::truth_solution(p, mu));
  EXPECT_LE(p.truth->l2_norm_omega(truth - online_trace(r.model, mu)), 1e-10 * p.truth->l2_norm_omega(truth));
}

TEST(Greedy, ToleranceStopsEarly) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D2, 6, 8);
  GreedyOptions opt;
  opt.n_max = 15;
  opt.tol = 1e-4;
  const GreedyResult r = greedy_offline(*p.op, p.loads, p.rhs, p.training, opt);
  ASSERT_LT(r.model.size(), 15u);
  EXPECT_LT(r.history.back().max_change, 1e-4);
  for (std::size_t i = 0; i + 1 < r.history.size(); ++i) EXPECT_GE(r.history[i].max_change, 1e-4);
}

TEST(Greedy, ResidualBasedModeDrivesTheBoundDown) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D1, 6, 8);
  EXPECT_THROW(fixture::train(p, 3, nullptr, GreedyMode::ResidualBased), ConfigError);
  const SCMModel scm = scm_build(*p.op, fixture::training_s(p), {6});
  const GreedyResult r = fixture::train(p, 6, &scm, GreedyMode::ResidualBased);
  ASSERT_EQ(r.model.size(), 6u);
  for (std::size_t i = 0; i + 2 < r.history.size(); ++i)
    EXPECT_LE(r.history[i + 1].max_objective, r.history[i].max_objective) << "N = " << r.history[i + 1].N;
  // Objective reported at each step is the largest certified bound left.
  const GreedyStep& last = r.history[r.history.size() - 2];
  double worst = 0.0;
  for (const auto& mu : p.training) {
    bool chosen = false;
    for (std::size_t n = 0; n < last.N; ++n) chosen |= r.model.mu_snapshots[n] == mu;
    if (!chosen) worst = std::max(worst, error_bound(r.model.truncated(last.N), scm, mu).delta_N);
  }
  EXPECT_NEAR(last.max_objective, worst, 1e-8 * worst);
}

TEST(Greedy, ResidualFreePicksLargestCoefficientSum) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D2, 6, 8);
  const GreedyResult r = fixture::train(p, 6);
  ASSERT_EQ(r.model.size(), 6u);
  for (std::size_t N = 1; N < 6; ++N) {
    const ReducedModel m = r.model.truncated(N);
    // Snapshot coordinates of a snapshot are a unit vector.
    for (std::size_t n = 0; n < N; ++n) {
      const Vector c = online_solve(m, m.mu_snapshots[n]).c;
      EXPECT_NEAR(c.lpNorm<1>(), 1.0, 1e-8);
      EXPECT_NEAR(c[static_cast<Eigen::Index>(n)], 1.0, 1e-8);
    }
    double best = -1.0;
    for (const auto& mu : p.training) {
      bool chosen = false;
      for (std::size_t n = 0; n < N; ++n) chosen |= m.mu_snapshots[n] == mu;
      if (!chosen) best = std::max(best, online_solve(m, mu).c.lpNorm<1>());
    }
    EXPECT_NEAR(online_solve(m, r.model.mu_snapshots[N]).c.lpNorm<1>(), best, 1e-10 * best) << "N = " << N;
    EXPECT_NEAR(r.history[N - 1].max_objective, best, 1e-10 * best);
  }
}

TEST(Greedy, InputValidation) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D1, 4, 4);
  GreedyOptions opt;
  EXPECT_THROW(greedy_offline(*p.op, p.loads, p.rhs, {}, opt), ConfigError);
  EXPECT_THROW(greedy_offline(*p.op, p.loads, p.rhs, {{0.7, 0.0}}, opt), ConfigError);
  opt.n_max = 0;
  EXPECT_THROW(greedy_offline(*p.op, p.loads, p.rhs, p.training, opt), ConfigError);
  EXPECT_THROW(greedy_mode_from_string("pod"), ConfigError);
  EXPECT_EQ(greedy_mode_from_string("residual_based"), GreedyMode::ResidualBased);
}

TEST(Greedy, ExhaustedTrainingSetStops) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D1, 4, 4);
  GreedyOptions opt;
  opt.n_max = 10;
  const std::vector<Parameter> training{{0.1, 0.0}, {0.3, 0.0}, {0.45, 0.0}};
  const GreedyResult r = greedy_offline(*p.op, p.loads, p.rhs, training, opt);
  EXPECT_EQ(r.model.size() + r.skipped.size(), 3u);
}
