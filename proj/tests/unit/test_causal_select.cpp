#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rxprice/causal_select.hpp"
#include "rxprice/datagen.hpp"
#include "rxprice/error.hpp"

namespace rxprice {
namespace {

double GridArgminScaling(double norm, double step, const PenaltyConfig& pen, double resolution) {
  // Coarse pass, then a fine pass around the coarse winner.
  auto objective = [&](double r) { return (r - norm) * (r - norm) / (2 * step) + pen.Value(r); };
  double best = 0.0;
  double best_val = objective(0.0);
  const double coarse = std::max(norm, 1e-12) / 20000.0;
  for (double r = 0.0; r <= norm + coarse; r += coarse) {
    if (const double v = objective(r); v < best_val) best_val = v, best = r;
  }
  const double lo = std::max(0.0, best - 2 * coarse);
  const double hi = std::min(norm, best + 2 * coarse);
  for (double r = lo; r <= hi; r += resolution) {
    if (const double v = objective(r); v < best_val) best_val = v, best = r;
  }
  return best;
}

ActionPartitionedData RandomBlocks(std::mt19937_64& rng, std::size_t q, std::size_t n_per, std::size_t p) {
  std::normal_distribution<double> normal;
  ActionPartitionedData data;
  for (std::size_t j = 0; j < q; ++j) {
    ActionBlock b{Eigen::MatrixXd(n_per, p), Eigen::VectorXd(n_per)};
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
      for (Eigen::Index k = 0; k < b.x.cols(); ++k) b.x(i, k) = normal(rng);
      b.y[i] = 2.0 * b.x(i, 0) - 1.5 * b.x(i, 1) + 0.3 * normal(rng);
    }
    data.blocks.push_back(std::move(b));
  }
  return Standardize(data);
}

TEST(Standardize, TwoPointBlock) {
  ActionPartitionedData raw;
  raw.blocks.push_back({Eigen::MatrixXd{{1.0}, {3.0}}, Eigen::VectorXd::Zero(2)});
  const auto out = Standardize(raw);
  EXPECT_DOUBLE_EQ(out.blocks[0].x(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(out.blocks[0].x(1, 0), 1.0);
}

TEST(Standardize, Idempotent) {
  std::mt19937_64 rng(3);
  const auto once = RandomBlocks(rng, 2, 50, 4);
  const auto twice = Standardize(once);
  for (std::size_t j = 0; j < once.blocks.size(); ++j) {
    EXPECT_LT((once.blocks[j].x - twice.blocks[j].x).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index k = 0; k < once.blocks[j].x.cols(); ++k) {
      const auto col = once.blocks[j].x.col(k);
      EXPECT_NEAR(col.mean(), 0.0, 1e-8);
      EXPECT_NEAR(col.squaredNorm() / static_cast<double>(col.size()), 1.0, 1e-8);
    }
  }
}

TEST(Standardize, ConstantColumnIsZeroedAndFlagged) {
  ActionPartitionedData raw;
  raw.blocks.push_back({Eigen::MatrixXd{{5.0, 1.0}, {5.0, 2.0}, {5.0, 4.0}}, Eigen::VectorXd::Zero(3)});
  const auto out = Standardize(raw);
  EXPECT_TRUE(out.constant[0][0]);
  EXPECT_FALSE(out.constant[0][1]);
  EXPECT_EQ(out.blocks[0].x.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.ConstantColumns(), std::vector<std::size_t>{0});
}

TEST(Standardize, EmptyBlockThrows) {
  ActionPartitionedData raw;
  raw.blocks.push_back({Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)});
  try {
    Standardize(raw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyBlock);
  }
}

TEST(PenaltyConfig, RejectsIllegalParameters) {
  EXPECT_THROW((PenaltyConfig{PenaltyKind::kMcp, 0.0, 3.0}.Validate()), Error);
  EXPECT_THROW((PenaltyConfig{PenaltyKind::kMcp, 0.1, 1.0}.Validate()), Error);
  EXPECT_THROW((PenaltyConfig{PenaltyKind::kScad, 0.1, 2.0}.Validate()), Error);
  EXPECT_THROW((PenaltyConfig{PenaltyKind::kL1, 0.1, 3.0, 0.0}.Validate()), Error);
  EXPECT_NO_THROW((PenaltyConfig{PenaltyKind::kScad, 0.1, 3.7}.Validate()));
}

TEST(PenaltyConfig, McpMatchesClosedForm) {
  const PenaltyConfig pen{PenaltyKind::kMcp, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(pen.Value(1.0), 1.0 - 0.25);
  EXPECT_DOUBLE_EQ(pen.Value(5.0), 1.0);  // gamma * lambda^2 / 2
}

TEST(GroupProx, ZeroRowStaysZero) {
  for (auto kind : {PenaltyKind::kMcp, PenaltyKind::kScad, PenaltyKind::kL1}) {
    const PenaltyConfig pen{kind, 0.7, 3.7};
    EXPECT_EQ(GroupProx(Eigen::VectorXd::Zero(3), 0.5, pen).norm(), 0.0);
  }
}

TEST(GroupProx, L1KillZone) {
  const PenaltyConfig pen{PenaltyKind::kL1, 2.0, 3.0};
  const Eigen::VectorXd row = Eigen::Vector2d(0.6, 0.8);  // norm 1 <= step * lambda
  EXPECT_EQ(GroupProx(row, 0.5, pen).norm(), 0.0);
}

TEST(GroupProx, McpWorkedExampleMatchesGridOracle) {
  const PenaltyConfig pen{PenaltyKind::kMcp, 1.0, 2.0};
  const Eigen::VectorXd row = Eigen::Vector2d(3.0, 4.0);
  const Eigen::VectorXd out = GroupProx(row, 1.0, pen);
  const double oracle = GridArgminScaling(5.0, 1.0, pen, 1e-7);
  EXPECT_NEAR(out.norm(), oracle, 1e-6);
  // Output is a nonnegative multiple of the input.
  EXPECT_NEAR(out[0] * row[1] - out[1] * row[0], 0.0, 1e-12);
  EXPECT_GE(out.dot(row), 0.0);
}

TEST(GroupProx, BeatsRandomPerturbations) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const PenaltyConfig pen{static_cast<PenaltyKind>(trial % 3), unif(rng), 3.7};
    const double step = unif(rng);
    Eigen::VectorXd row(3);
    for (auto& v : row) v = 2.0 * normal(rng);
    auto objective = [&](const Eigen::VectorXd& v) {
      return (v - row).squaredNorm() / (2 * step) + pen.Value(v.norm());
    };
    const Eigen::VectorXd best = GroupProx(row, step, pen);
    const double best_val = objective(best);
    for (int k = 0; k < 10000; ++k) {
      Eigen::VectorXd candidate = best;
      for (auto& v : candidate) v += 0.1 * normal(rng);
      ASSERT_GE(objective(candidate), best_val - 1e-9);
    }
  }
}

TEST(LargestEigenvalue, DiagonalMatrix) {
  const Eigen::MatrixXd m = Eigen::Vector3d(1.0, 4.0, 2.0).asDiagonal();
  EXPECT_NEAR(LargestEigenvalue(m), 4.0, 1e-4);
  EXPECT_GE(LargestEigenvalue(m), 4.0);  // never an underestimate
}

TEST(ProjectRowNormBall, ShrinksOntoBall) {
  Eigen::MatrixXd theta{{3.0, 4.0}, {0.0, 1.0}, {0.0, 0.0}};
  const auto projected = ProjectRowNormBall(theta, 2.0);
  EXPECT_NEAR(projected.rowwise().norm().sum(), 2.0, 1e-12);
  EXPECT_EQ(ProjectRowNormBall(theta, 10.0), theta);
}

TEST(FitGroupSparse, ZeroOutcomeGivesEmptySupport) {
  std::mt19937_64 rng(5);
  auto data = RandomBlocks(rng, 2, 40, 5);
  for (auto& b : data.blocks) b.y.setZero();
  const auto result = FitGroupSparse(data, {PenaltyKind::kMcp, 0.1, 3.0});
  EXPECT_EQ(result.theta.norm(), 0.0);
  EXPECT_TRUE(result.support.empty());
  EXPECT_TRUE(result.converged);
}

TEST(FitGroupSparse, OrthonormalDesignIsSoftThresholdedLeastSquares) {
  // Columns of sqrt(n) * I-like design: X^T X / n = I.
  const int n = 4;
  Eigen::MatrixXd x = 2.0 * Eigen::MatrixXd::Identity(n, n);  // X^T X / 4 = I
  Eigen::VectorXd y(n);
  y << 1.0, -0.3, 0.05, 0.8;
  ActionPartitionedData data;
  data.blocks.push_back({x, y});
  const double lambda = 0.1;
  GroupSparseOptions options;
  options.tol = 1e-12;
  const auto result = FitGroupSparse(data, {PenaltyKind::kL1, lambda, 3.0}, options);
  const Eigen::VectorXd ls = x.transpose() * y / n;
  for (int k = 0; k < n; ++k) {
    const double expected = std::copysign(std::max(std::abs(ls[k]) - lambda, 0.0), ls[k]);
    EXPECT_NEAR(result.theta(k, 0), expected, 1e-6);
  }
}

TEST(FitGroupSparse, ObjectiveIsMonotone) {
  std::mt19937_64 rng(9);
  const auto data = RandomBlocks(rng, 3, 60, 12);
  for (auto kind : {PenaltyKind::kMcp, PenaltyKind::kScad, PenaltyKind::kL1}) {
    const auto result = FitGroupSparse(data, {kind, 0.2, 3.7});
    ASSERT_GE(result.objective_history.size(), 2u);
    for (std::size_t t = 1; t < result.objective_history.size(); ++t) {
      EXPECT_LE(result.objective_history[t], result.objective_history[t - 1] + 1e-10);
    }
  }
}

TEST(FitGroupSparse, PermutationEquivariant) {
  std::mt19937_64 rng(21);
  const auto data = RandomBlocks(rng, 2, 80, 6);
  const std::vector<Eigen::Index> perm{3, 5, 0, 1, 4, 2};  // new column c holds old perm[c]
  ActionPartitionedData permuted = data;
  for (auto& b : permuted.blocks) {
    Eigen::MatrixXd x(b.x.rows(), b.x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) x.col(c) = b.x.col(perm[static_cast<std::size_t>(c)]);
    b.x = x;
  }
  const PenaltyConfig pen{PenaltyKind::kMcp, 0.15, 3.0};
  const auto a = FitGroupSparse(data, pen);
  const auto b = FitGroupSparse(permuted, pen);
  std::vector<std::size_t> mapped;
  for (auto c : b.support) mapped.push_back(static_cast<std::size_t>(perm[c]));
  std::sort(mapped.begin(), mapped.end());
  EXPECT_EQ(mapped, a.support);
  EXPECT_EQ(a.support, (std::vector<std::size_t>{0, 1}));
}

TEST(FitGroupSparse, SupportShrinksAsLambdaGrows) {
  DatagenConfig config;
  config.covariates = 60;
  config.samples = 600;
  config.seed = 4;
  const auto [obs, truth] = Generate(config);
  const auto design = EncodeForSelection(obs);
  const auto data = Standardize(design.data);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double lambda = 0.01; lambda < 1.0; lambda *= 1.6) {
    const auto result = FitGroupSparse(data, {PenaltyKind::kMcp, lambda, 3.0});
    EXPECT_LE(result.support.size(), previous) << "lambda " << lambda;
    previous = result.support.size();
  }
  EXPECT_EQ(previous, 0u);
}

TEST(FitGroupSparse, PerActionUnionContainsJointSupport) {
  std::mt19937_64 rng(31);
  const auto data = RandomBlocks(rng, 3, 100, 8);
  const PenaltyConfig pen{PenaltyKind::kMcp, 0.1, 3.0};
  const auto joint = FitGroupSparse(data, pen);
  std::vector<std::size_t> united;
  for (const auto& block : data.blocks) {
    ActionPartitionedData single;
    single.blocks.push_back(block);
    const auto part = FitGroupSparse(single, pen);
    united.insert(united.end(), part.support.begin(), part.support.end());
  }
  std::sort(united.begin(), united.end());
  united.erase(std::unique(united.begin(), united.end()), united.end());
  EXPECT_TRUE(std::includes(united.begin(), united.end(), joint.support.begin(), joint.support.end()));
}

TEST(FitGroupSparse, RadiusProjectionKeepsIterateInBall) {
  std::mt19937_64 rng(8);
  const auto data = RandomBlocks(rng, 2, 50, 4);
  PenaltyConfig pen{PenaltyKind::kL1, 0.01, 3.0, 0.5};
  const auto result = FitGroupSparse(data, pen);
  EXPECT_LE(result.theta.rowwise().norm().sum(), 0.5 + 1e-9);
}

TEST(FitGroupSparse, ConstantColumnsAreNeverSelected) {
  std::mt19937_64 rng(2);
  ActionPartitionedData raw;
  std::normal_distribution<double> normal;
  for (int j = 0; j < 2; ++j) {
    ActionBlock b{Eigen::MatrixXd(30, 2), Eigen::VectorXd(30)};
    for (int i = 0; i < 30; ++i) {
      b.x(i, 0) = 7.0;
      b.x(i, 1) = normal(rng);
      b.y[i] = b.x(i, 1);
    }
    raw.blocks.push_back(b);
  }
  const auto result = FitGroupSparse(Standardize(raw), {PenaltyKind::kMcp, 0.05, 3.0});
  EXPECT_EQ(result.support, std::vector<std::size_t>{1});
  EXPECT_EQ(result.constant_columns, std::vector<std::size_t>{0});
}

TEST(ExtractSupport, Definition) {
  SelectionResult result;
  result.theta = Eigen::MatrixXd{{0.0}, {0.5}, {1e-12}};
  result.row_norms = result.theta.rowwise().norm();
  EXPECT_EQ(ExtractSupport(result, 1e-8), std::vector<std::size_t>{1});
  result.theta.setZero();
  result.row_norms.setZero();
  EXPECT_TRUE(ExtractSupport(result, 1e-8).empty());
  result.theta = Eigen::MatrixXd::Constant(3, 2, 0.1);
  result.row_norms = result.theta.rowwise().norm();
  EXPECT_EQ(ExtractSupport(result, 0.0).size(), 3u);
}

TEST(EncodeForSelection, DropsReferenceLevelAndMapsFeatures) {
  ObservationSet obs;
  obs.schema = {{"a", {"x", "y", "z"}}, {"b", {"0", "1"}}};
  obs.price_grid = {100, 200, 300};
  obs.rows = {{{0, 1}, 100, 1}, {{2, 0}, 100, 0}, {{1, 1}, 300, 1}};
  const auto design = EncodeForSelection(obs);
  EXPECT_EQ(design.column_feature, (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(design.action_price_index, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(design.data.blocks[0].x.rows(), 2);
  EXPECT_EQ(FeatureSupport({1, 2}, design.column_feature), (std::vector<std::size_t>{0, 1}));
}

TEST(FitGroupSparse, NoPlantedStructureSelectsNothing) {
  DatagenConfig config;
  config.covariates = 40;
  config.samples = 800;
  config.treatment_only = 0;
  config.confounders = 0;
  config.predictors = 0;
  config.seed = 12;
  const auto [obs, truth] = Generate(config);
  const auto design = EncodeForSelection(obs);
  const auto data = Standardize(design.data);
  const PenaltyConfig pen{PenaltyKind::kMcp, DefaultLambda(data.covariates(), data.actions(), data.samples(), 0.2), 3.0};
  const auto result = FitGroupSparse(data, pen);
  EXPECT_LE(FeatureSupport(result.support, design.column_feature).size(), 1u);
}

}  // namespace
}  // namespace rxprice
