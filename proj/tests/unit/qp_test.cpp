#include <gtest/gtest.h>

#include <cmath>

#include "closedlink/qp.hpp"
#include "qp_oracle.hpp"
#include "test_models.hpp"

using namespace closedlink;
using namespace testing_support;

TEST(QpSolve, MinimumNormWithOneEquality) {
  QuadraticProgram qp(4);
  qp.add_regularization(0, 4, 1.0);
  qp.add_equality(MatX::Identity(1, 4), VecX::Ones(1));
  const QpSolution sol = solve(qp);
  EXPECT_LT((sol.x - Eigen::Vector4d(1, 0, 0, 0)).norm(), 1e-14);
  EXPECT_NEAR(sol.equality_multipliers[0], -2.0, 1e-12);
}

TEST(QpSolve, ActiveUpperBoundHasAnalyticMultiplier) {
  QuadraticProgram qp(1);
  qp.add_term(MatX::Ones(1, 1), VecX::Constant(1, 2.0));
  qp.add_inequality(MatX::Ones(1, 1), VecX::Ones(1));
  const QpSolution sol = solve(qp);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-14);
  EXPECT_NEAR(sol.upper_multipliers[0], 2.0, 1e-12);
  ASSERT_EQ(sol.active_set.size(), 1u);
  EXPECT_EQ(sol.active_set[0], (ActiveBound{0, false}));
}

TEST(QpSolve, InactiveConstraintsHaveZeroMultipliers) {
  QuadraticProgram qp(2);
  qp.add_term(MatX::Identity(2, 2), Eigen::Vector2d(0.1, 0.2));
  qp.add_inequality(MatX::Identity(2, 2), VecX::Ones(2), -VecX::Ones(2));
  const QpSolution sol = solve(qp);
  EXPECT_TRUE(sol.active_set.empty());
  EXPECT_EQ(sol.upper_multipliers.norm() + sol.lower_multipliers.norm(), 0.0);
}

TEST(QpSolve, MatchesEnumerationOracleOnRandomProblems) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const bool two_sided = trial % 2 == 1;
    const int eqs = trial % 3;
    const QuadraticProgram qp = random_qp(rng, two_sided ? 8 : 20, eqs, two_sided ? 5 : 10, two_sided);
    const QpSolution sol = solve(qp);
    const auto oracle = enumerate_active_sets(qp);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_LE((sol.x - *oracle).lpNorm<Eigen::Infinity>(), 1e-8) << trial;
    EXPECT_LE(sol.residuals.max(), 1e-9) << trial;
  }
}

TEST(QpSolve, IndependentCheckerConfirmsAndDetectsPerturbation) {
  std::mt19937 rng(12);
  const QuadraticProgram qp = random_qp(rng, 10, 2, 8);
  const QpSolution sol = solve(qp);
  const KktResiduals ok = check_kkt(qp, sol.x, sol.equality_multipliers, sol.upper_multipliers,
                                    sol.lower_multipliers);
  EXPECT_LE(ok.max(), 1e-9);
  VecX x = sol.x;
  x[0] += 1e-3;
  EXPECT_GT(check_kkt(qp, x, sol.equality_multipliers, sol.upper_multipliers, sol.lower_multipliers).max(), 1e-5);
  VecX up = sol.upper_multipliers;
  up[0] -= 1.0;
  EXPECT_GE(check_kkt(qp, sol.x, sol.equality_multipliers, up, sol.lower_multipliers).dual, 0.0);
}

TEST(QpSolve, ObjectiveNeverIncreasesAcrossIterates) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const QpSolution sol = solve(random_qp(rng, 15, 1, 12));
    for (size_t k = 1; k < sol.objective_history.size(); ++k) {
      EXPECT_LE(sol.objective_history[k], sol.objective_history[k - 1] + 1e-12);
    }
  }
}

TEST(QpSolve, IsDeterministic) {
  std::mt19937 rng(14);
  const QuadraticProgram qp = random_qp(rng, 12, 2, 10);
  const QpSolution a = solve(qp);
  const QpSolution b = solve(qp);
  EXPECT_EQ(a.active_set, b.active_set);
  EXPECT_EQ((a.x - b.x).norm(), 0.0);
}

TEST(QpSolve, RedundantEqualitiesAreTolerated) {
  QuadraticProgram qp(3);
  qp.add_regularization(0, 3, 1.0);
  MatX c(2, 3);
  c << 1, 1, 0, 2, 2, 0;
  qp.add_equality(c, Eigen::Vector2d(1, 2));
  const QpSolution sol = solve(qp);
  EXPECT_LT((sol.x - Eigen::Vector3d(0.5, 0.5, 0)).norm(), 1e-12);
  EXPECT_LE(sol.residuals.max(), 1e-9);
}

TEST(QpSolve, DegenerateVertexWithDependentConstraints) {
  // A friction pyramid plus a non-negative normal force meet at the origin.
  QuadraticProgram qp(3);
  qp.add_term(MatX::Identity(3, 3), Eigen::Vector3d(1.0, 0.0, -1.0));
  MatX g(5, 3);
  g << 1, 0, -0.5, -1, 0, -0.5, 0, 1, -0.5, 0, -1, -0.5, 0, 0, -1;
  qp.add_inequality(g, VecX::Zero(5));
  const QpSolution sol = solve(qp);
  EXPECT_LT(sol.x.norm(), 1e-12);
  EXPECT_LE(sol.residuals.max(), 1e-9);
  const auto oracle = enumerate_active_sets(qp);
  ASSERT_TRUE(oracle);
  EXPECT_LT((sol.x - *oracle).norm(), 1e-10);
}

TEST(QpSolve, ContradictoryBoundsAreInfeasibleWithCertificate) {
  QuadraticProgram qp(2);
  qp.add_regularization(0, 2, 1.0);
  MatX g(2, 2);
  g << 1, 1, -1, -1;
  qp.add_inequality(g, Eigen::Vector2d(0.0, -1.0));
  try {
    solve(qp);
    FAIL();
  } catch (const Infeasible& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    EXPECT_EQ(e.violated().size(), 2u);
    EXPECT_LT(e.certificate_residual(), 1e-12);
  }
}

TEST(QpSolve, InconsistentEqualitiesAreInfeasible) {
  QuadraticProgram qp(2);
  qp.add_regularization(0, 2, 1.0);
  MatX c(2, 2);
  c << 1, 0, 1, 0;
  qp.add_equality(c, Eigen::Vector2d(0.0, 1.0));
  EXPECT_THROW(solve(qp), Infeasible);
}

TEST(QpSolve, MissingCurvatureIsNonConvex) {
  QuadraticProgram qp(2);
  qp.add_term(MatX::Identity(1, 2), VecX::Ones(1));
  try {
    solve(qp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonConvex);
  }
}

TEST(QpSolve, IterationLimitIsReported) {
  std::mt19937 rng(15);
  const QuadraticProgram qp = random_qp(rng, 10, 0, 10);
  // Shift the problem so the unconstrained minimizer violates several rows.
  QuadraticProgram shifted(10);
  shifted.add_term(MatX::Identity(10, 10), VecX::Constant(10, 100.0));
  shifted.add_inequality(qp.inequality_matrix(), qp.inequality_upper());
  try {
    solve(shifted, QpOptions{1, 1e-9});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMaxIterations);
  }
}

TEST(QpModel, RejectsInconsistentDimensions) {
  QuadraticProgram qp(3);
  EXPECT_THROW(qp.add_term(MatX::Identity(2, 2), VecX::Zero(2)), Error);
  EXPECT_THROW(qp.add_equality(MatX::Identity(1, 3), VecX::Zero(2)), Error);
  EXPECT_THROW(qp.add_inequality(MatX::Identity(1, 3), VecX::Zero(1), VecX::Ones(1)), Error);
}
