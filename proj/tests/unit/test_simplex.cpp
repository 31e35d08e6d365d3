#include <random>

#include <gtest/gtest.h>

#include "rxprice/simplex.hpp"

namespace rxprice {
namespace {

TEST(SolveLp, SmallTextbookProblem) {
  // max 3x + 2y  s.t.  x + y + s1 = 4,  x + 3y + s2 = 6
  LinearProgram lp;
  lp.a = Eigen::MatrixXd{{1, 1, 1, 0}, {1, 3, 0, 1}};
  lp.b = Eigen::Vector2d(4, 6);
  lp.c = Eigen::Vector4d(3, 2, 0, 0);
  const auto sol = SolveLp(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, 12.0, 1e-9);
  EXPECT_NEAR(sol.x[0], 4.0, 1e-9);
}

TEST(SolveLp, DetectsInfeasibility) {
  LinearProgram lp;
  lp.a = Eigen::MatrixXd{{1, 1}, {1, 1}};
  lp.b = Eigen::Vector2d(1, 2);
  lp.c = Eigen::Vector2d(1, 1);
  EXPECT_EQ(SolveLp(lp).status, LpStatus::kInfeasible);
}

TEST(SolveLp, DetectsUnboundedness) {
  LinearProgram lp;
  lp.a = Eigen::MatrixXd{{1, -1}};
  lp.b = Eigen::VectorXd::Constant(1, 1.0);
  lp.c = Eigen::Vector2d(1, 0);
  EXPECT_EQ(SolveLp(lp).status, LpStatus::kUnbounded);
}

TEST(SolveLp, RedundantRows) {
  LinearProgram lp;
  lp.a = Eigen::MatrixXd{{1, 1, 0}, {2, 2, 0}, {0, 1, 1}};
  lp.b = Eigen::Vector3d(1, 2, 1);
  lp.c = Eigen::Vector3d(1, 2, 0);
  const auto sol = SolveLp(lp);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, 2.0, 1e-9);
}

// Random set-partitioning style masters: primal feasibility, dual
// feasibility, complementary slackness and zero duality gap.
TEST(SolveLp, RandomMastersSatisfyOptimalityConditions) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> value(-1.0, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int rows = 3 + static_cast<int>(rng() % 6);
    const int cols = 5 + static_cast<int>(rng() % 20);
    // [coverage columns | row slacks | cardinality slack]
    const int total = cols + rows + 1;
    LinearProgram lp;
    lp.a = Eigen::MatrixXd::Zero(rows + 1, total);
    lp.c = Eigen::VectorXd::Zero(total);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) lp.a(i, j) = (rng() % 3 == 0) ? 1.0 : 0.0;
      lp.a(rows, j) = 1.0;
      lp.c[j] = value(rng);
    }
    for (int i = 0; i < rows; ++i) {
      lp.a(i, cols + i) = 1.0;
      lp.c[cols + i] = -10.0;
    }
    lp.a(rows, total - 1) = 1.0;
    lp.b = Eigen::VectorXd::Ones(rows + 1);
    lp.b[rows] = 2.0;

    const auto sol = SolveLp(lp);
    ASSERT_EQ(sol.status, LpStatus::kOptimal);
    EXPECT_LT((lp.a * sol.x - lp.b).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_GE(sol.x.minCoeff(), -1e-9);
    const Eigen::VectorXd reduced = lp.c - lp.a.transpose() * sol.duals;
    EXPECT_LE(reduced.maxCoeff(), 1e-7);
    for (int j = 0; j < total; ++j) EXPECT_LT(std::abs(sol.x[j] * reduced[j]), 1e-7);
    EXPECT_NEAR(sol.objective, lp.b.dot(sol.duals), 1e-7);

    // Warm start from the optimal basis is already optimal.
    const auto again = SolveLp(lp, {}, sol.basis);
    ASSERT_EQ(again.status, LpStatus::kOptimal);
    EXPECT_NEAR(again.objective, sol.objective, 1e-9);
  }
}

}  // namespace
}  // namespace rxprice
