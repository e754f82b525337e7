#include <gtest/gtest.h>

#include <chrono>

#include "fixture.hpp"

using namespace frbm;

namespace {

class RBM : public ::testing::TestWithParam<Subdomain> {
 protected:
  static void SetUpTestSuite() {
    for (Subdomain d : {Subdomain::D1, Subdomain::D2}) {
      auto& s = state(d);
      s.problem = std::make_unique<fixture::Problem>(fixture::make_problem(d));
      s.result = fixture::train(*s.problem, 8);
    }
  }
  struct State {
    std::unique_ptr<fixture::Problem> problem;
    GreedyResult result;
  };
  static State& state(Subdomain d) {
    static State s1, s2;
    return d == Subdomain::D1 ? s1 : s2;
  }
  const fixture::Problem& problem() const { return *state(GetParam()).problem; }
  const ReducedModel& model() const { return state(GetParam()).result.model; }
};

}  // namespace

TEST_P(RBM, SnapshotsAreReproduced) {
  ASSERT_EQ(model().size(), 8u);
  for (const Parameter& mu : model().mu_snapshots) {
    const Field2D truth = problem().truth->trace_bottom(fixture::truth_solution(problem(), mu));
    const Field2D uN = online_trace(model(), mu);
    EXPECT_LE(problem().truth->l2_norm_omega(truth - uN), 1e-10 * problem().truth->l2_norm_omega(truth)) << mu.s;
  }
}

TEST_P(RBM, SelectedParametersAreDistinct) {
  const auto& mus = model().mu_snapshots;
  for (std::size_t i = 0; i < mus.size(); ++i)
    for (std::size_t j = i + 1; j < mus.size(); ++j) EXPECT_NE(mus[i].s, mus[j].s);
}

TEST_P(RBM, BasisIsOrthonormalAndSpansSnapshots) {
  const Matrix G = fixture::dense_reference(problem());
  const Matrix& V = model().basis;
  EXPECT_LT((V.transpose() * G * V - Matrix::Identity(V.cols(), V.cols())).cwiseAbs().maxCoeff(), 1e-10);
  for (std::size_t n = 0; n < model().size(); ++n) {
    const Vector u = fixture::truth_solution(problem(), model().mu_snapshots[n]);
    const Vector rebuilt = V * model().R.col(static_cast<Eigen::Index>(n));
    EXPECT_LE(problem().truth->reference_norm(u - rebuilt), 1e-10 * problem().truth->reference_norm(u));
  }
}

TEST_P(RBM, ReducedOperatorsAreSymmetricProjections) {
  const Matrix& V = model().basis;
  for (std::size_t q = 0; q < problem().op->size(); ++q) {
    const Matrix& A = model().reduced_ops[q];
    EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12 * A.cwiseAbs().maxCoeff());
    const Matrix Aq(kronecker_assemble(problem().truth->basis(), problem().op->component(q)));
    EXPECT_LT((V.transpose() * Aq * V - A).cwiseAbs().maxCoeff(), 1e-9 * A.cwiseAbs().maxCoeff());
  }
  const Vector Vf = V.transpose() * problem().loads[0];
  EXPECT_LT((Vf - model().reduced_loads[0]).norm(), 1e-13 * Vf.norm());
}

TEST_P(RBM, OnlineSolveIsTheGalerkinProjection) {
  const Matrix& V = model().basis;
  const auto [lo, hi] = subdomain_range(GetParam(), ParameterRange{});
  for (double s : equispaced(lo + 0.01, hi - 0.01, 5)) {
    const Parameter mu{s, 0.0};
    const Matrix A = fixture::dense_operator(problem(), mu);
    const Matrix AN = V.transpose() * A * V;
    const Vector ref = AN.ldlt().solve(V.transpose() * problem().loads[0]);
    const OnlineSolution sol = online_solve(model(), mu);
    EXPECT_LT((sol.c_orth - ref).norm(), 1e-8 * ref.norm()) << s;
    // Galerkin is the best approximation from span(V) in the μ-energy norm.
    const Vector u = fixture::truth_solution(problem(), mu);
    const Vector e = u - V * sol.c_orth;
    const Vector best = V * (AN.ldlt().solve(V.transpose() * A * u));
    EXPECT_LE(e.dot(A * e), (u - best).dot(A * (u - best)) * (1 + 1e-6) + 1e-30) << s;
  }
}

TEST_P(RBM, FirstSnapshotOfSingleTermModel) {
  const ReducedModel one = model().truncated(1);
  const OnlineSolution sol = online_solve(one, one.mu_snapshots[0]);
  ASSERT_EQ(sol.c.size(), 1);
  EXPECT_NEAR(sol.c[0], 1.0, 1e-12);
}

TEST_P(RBM, TruncationMatchesShorterTraining) {
  const GreedyResult short_run = fixture::train(problem(), 4);
  const ReducedModel cut = model().truncated(4);
  EXPECT_EQ(cut.mu_snapshots, short_run.model.mu_snapshots);
  const auto [lo, hi] = subdomain_range(GetParam(), ParameterRange{});
  const Parameter mu{0.5 * (lo + hi) + 0.013, 0.0};
  const Vector a = online_solve(cut, mu).c;
  const Vector b = online_solve(short_run.model, mu).c;
  EXPECT_LT((a - b).norm(), 1e-12 * b.norm());
  EXPECT_EQ(cut.riesz.R.cols(), short_run.model.riesz.R.cols());
}

TEST_P(RBM, TraceIsLinearInCoefficients) {
  const Vector c = Vector::LinSpaced(static_cast<Eigen::Index>(model().size()), -1.0, 1.0);
  EXPECT_EQ(online_trace(model(), Vector::Zero(c.size())).norm(), 0.0);
  EXPECT_LT((online_trace(model(), Vector(2.5 * c)) - 2.5 * online_trace(model(), c)).norm(),
            1e-12 * online_trace(model(), c).norm());
  EXPECT_NEAR(trace_l2_norm(model(), c), problem().truth->l2_norm_omega(online_trace(model(), c)),
              1e-12 * trace_l2_norm(model(), c));
}

TEST_P(RBM, EnsembleAtSnapshotsIsTiny) {
  const TruthTraces traces = compute_truth_traces(*problem().op, problem().loads, problem().rhs,
                                                  {model().mu_snapshots[0], model().mu_snapshots[3]}, true);
  const ErrorEnsemble e = error_ensembles(model(), *problem().truth, traces);
  for (double v : e.eim_errors) EXPECT_LE(v, 1e-10);
  for (std::size_t i = 0; i < e.exact_errors.size(); ++i) {
    EXPECT_NEAR(e.exact_errors[i], e.truth_gap[i], 1e-10);
  }
}

TEST_P(RBM, RejectsParameterOutsideSubdomain) {
  EXPECT_THROW(online_solve(model(), {GetParam() == Subdomain::D1 ? 0.7 : 0.3, 0.0}), ConfigError);
}

INSTANTIATE_TEST_SUITE_P(Subdomains, RBM, ::testing::Values(Subdomain::D1, Subdomain::D2),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(RBMStats, EnsembleStats) {
  const EnsembleStats s = ensemble_stats({3.0, 1.0, 2.0, 10.0});
  EXPECT_EQ(s.median, 2.5);
  EXPECT_EQ(s.max, 10.0);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(ensemble_stats({4.0, 1.0, 2.0}).median, 2.0);
}

TEST(RBMStats, TwoParameterLoads) {
  const fixture::Problem p = fixture::make_problem(Subdomain::D2, 6, 8, RhsSpec{RhsKind::Example2, {}});
  const GreedyResult r = fixture::train(p, 6);
  for (const Parameter& mu : r.model.mu_snapshots) {
    const Field2D truth = p.truth->trace_bottom(fixture::truth_solution(p, mu));
    EXPECT_LE(p.truth->l2_norm_omega(truth - online_trace(r.model, mu)), 1e-10 * p.truth->l2_norm_omega(truth));
  }
}

TEST(RBMStats, OnlineCostIndependentOfTruthSize) {
  auto online_seconds = [](int n, int M) {
    const fixture::Problem p = fixture::make_problem(Subdomain::D1, n, M);
    const ReducedModel model = fixture::train(p, 10).model;
    const std::vector<double> s = equispaced(0.05, 0.45, 50);
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      double sink = 0.0;
      for (int k = 0; k < 20; ++k)
        for (double v : s) sink += online_solve(model, {v, 0.0}).c[0];
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      EXPECT_TRUE(std::isfinite(sink));
      best = std::min(best, dt);
    }
    return best;
  };
  const double small = online_seconds(8, 10);   // 490 dofs
  const double large = online_seconds(16, 20);  // 4500 dofs
  const double ratio = large / small;
  EXPECT_GE(ratio, 0.5);
  EXPECT_LE(ratio, 2.0);
}
