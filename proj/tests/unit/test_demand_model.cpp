#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rxprice/datagen.hpp"
#include "rxprice/demand_model.hpp"
#include "rxprice/error.hpp"

namespace rxprice {
namespace {

LogisticProblem RandomProblem(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dims(2, 6);
  const int n = 30, d = dims(rng);
  LogisticProblem problem;
  problem.design = Eigen::MatrixXd(n, d);
  problem.outcome = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) problem.design(i, k) = normal(rng);
    problem.outcome[i] = normal(rng) > 0 ? 1.0 : 0.0;
  }
  problem.penalized.assign(d, true);
  problem.penalized[0] = false;
  problem.reg = 1e-3;
  return problem;
}

TEST(LogisticProblem, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const auto problem = RandomProblem(rng);
    Eigen::VectorXd w(problem.design.cols());
    for (auto& v : w) v = normal(rng);
    const Eigen::VectorXd grad = problem.Gradient(w);
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      Eigen::VectorXd up = w, down = w;
      up[k] += 1e-5;
      down[k] -= 1e-5;
      const double fd = (problem.Loss(up) - problem.Loss(down)) / 2e-5;
      EXPECT_LE(std::abs(fd - grad[k]) / std::max(1.0, std::abs(grad[k])), 1e-5);
    }
  }
}

TEST(MinimizeLogistic, ReachesGradientTolerance) {
  std::mt19937_64 rng(23);
  const auto problem = RandomProblem(rng);
  const auto result = MinimizeLogistic(problem);
  EXPECT_LT(result.gradient_norm, 1e-7);
  EXPECT_LT(problem.Gradient(result.weights).norm(), 1e-7);
}

TEST(FitDemand, AllPurchasedIsDegenerate) {
  ObservationSet obs;
  obs.schema = {{"a", {"0", "1"}}};
  obs.price_grid = {100, 200};
  for (int i = 0; i < 10; ++i) obs.rows.push_back({{static_cast<std::size_t>(i % 2)}, 100.0 * (1 + i % 2), 1});
  const auto fit = FitDemand(obs, {0});
  EXPECT_TRUE(fit.degenerate);
  const auto cf = Counterfactuals(fit, obs);
  EXPECT_GT(cf.f.minCoeff(), 0.99);
  EXPECT_LT(cf.f.maxCoeff(), 1.0);
}

TEST(FitDemand, RecoversNegativePriceSlopeOnSyntheticData) {
  DatagenConfig config;
  config.seed = 3;
  const auto [obs, truth] = Generate(config);
  const auto fit = FitDemand(obs, truth.true_support);
  EXPECT_FALSE(fit.degenerate);
  EXPECT_LT(fit.price_coef, 0.0);
  EXPECT_LT(fit.gradient_norm, 1e-7);
  EXPECT_TRUE(std::isfinite(fit.train_log_loss));
}

TEST(FitDemand, Deterministic) {
  DatagenConfig config;
  config.samples = 300;
  const auto [obs, truth] = Generate(config);
  const auto a = FitDemand(obs, {0, 1});
  const auto b = FitDemand(obs, {0, 1});
  EXPECT_EQ(a.level_weights, b.level_weights);
  EXPECT_EQ(a.price_coef, b.price_coef);
}

TEST(Counterfactuals, HandSetWeights) {
  DemandFit fit;
  fit.intercept = 0.0;
  fit.price_coef = -0.01;
  ObservationSet obs;
  obs.price_grid = {100, 200};
  obs.rows = {{{}, 100, 1}};
  const auto cf = Counterfactuals(fit, obs);
  const double f1 = 1.0 / (1.0 + std::exp(1.0));
  const double f2 = 1.0 / (1.0 + std::exp(2.0));
  EXPECT_DOUBLE_EQ(cf.f(0, 0), f1);
  EXPECT_DOUBLE_EQ(cf.f(0, 1), f2);
  EXPECT_DOUBLE_EQ(cf.g(0, 0), 100 * f1);
  EXPECT_DOUBLE_EQ(cf.g(0, 1), 200 * f2);
}

TEST(Counterfactuals, ZeroPriceGivesZeroRevenue) {
  DemandFit fit;
  fit.price_coef = -0.01;
  ObservationSet obs;
  obs.price_grid = {0, 100};
  obs.rows = {{{}, 100, 1}, {{}, 100, 0}};
  const auto cf = Counterfactuals(fit, obs);
  EXPECT_EQ(cf.g.col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Counterfactuals, RevenueIdentityAndMonotoneDemand) {
  DatagenConfig config;
  config.seed = 8;
  const auto [obs, truth] = Generate(config);
  const auto fit = FitDemand(obs, truth.true_support);
  ASSERT_LT(fit.price_coef, 0.0);
  const auto cf = Counterfactuals(fit, obs);
  for (Eigen::Index i = 0; i < cf.f.rows(); ++i) {
    for (Eigen::Index k = 0; k < cf.f.cols(); ++k) {
      EXPECT_GT(cf.f(i, k), 0.0);
      EXPECT_LT(cf.f(i, k), 1.0);
      EXPECT_EQ(cf.g(i, k), cf.price_grid[k] * cf.f(i, k));
      if (k > 0) EXPECT_LT(cf.f(i, k), cf.f(i, k - 1));
    }
  }
}

TEST(EvaluatePolicy, SingleSampleArithmetic) {
  const auto cf = CounterfactualsFromProbabilities(Eigen::MatrixXd::Constant(1, 1, 0.5), {510});
  const std::vector<std::size_t> a{0};
  const auto kpis = EvaluatePolicy(cf, a);
  EXPECT_DOUBLE_EQ(kpis.revenue_per_request, 255.0);
  EXPECT_DOUBLE_EQ(kpis.conversion_rate, 0.5);
  EXPECT_FALSE(kpis.uplift.has_value());
}

TEST(EvaluatePolicy, IdenticalAssignmentsHaveZeroUplift) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Eigen::MatrixXd f(20, 3);
  for (auto& v : f.reshaped()) v = u(rng);
  const auto cf = CounterfactualsFromProbabilities(f, {100, 150, 200});
  std::vector<std::size_t> a(20);
  for (auto& k : a) k = rng() % 3;
  const auto kpis = EvaluatePolicy(cf, a, a);
  ASSERT_TRUE(kpis.uplift.has_value());
  EXPECT_EQ(*kpis.uplift, 0.0);
}

TEST(EvaluatePolicy, MixtureLinearity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Eigen::MatrixXd f(40, 4);
  for (auto& v : f.reshaped()) v = u(rng);
  const auto cf = CounterfactualsFromProbabilities(f, {100, 150, 200, 250});
  std::vector<std::size_t> a(40);
  for (auto& k : a) k = rng() % 4;
  const auto whole = EvaluatePolicy(cf, a);
  // Split the samples into two groups and recombine by size.
  double revenue = 0.0, conversion = 0.0;
  for (int part = 0; part < 2; ++part) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < 40; ++i) if ((i * 7 + 3) % 2 == part) rows.push_back(i);
    Eigen::MatrixXd sub(rows.size(), 4);
    std::vector<std::size_t> sub_a;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sub.row(r) = f.row(rows[r]);
      sub_a.push_back(a[rows[r]]);
    }
    const auto kpis = EvaluatePolicy(CounterfactualsFromProbabilities(sub, cf.price_grid), sub_a);
    revenue += kpis.revenue_per_request * rows.size() / 40.0;
    conversion += kpis.conversion_rate * rows.size() / 40.0;
  }
  EXPECT_NEAR(revenue, whole.revenue_per_request, 1e-9);
  EXPECT_NEAR(conversion, whole.conversion_rate, 1e-12);
}

TEST(EvaluatePolicy, RejectsBadAssignment) {
  const auto cf = CounterfactualsFromProbabilities(Eigen::MatrixXd::Constant(2, 2, 0.5), {1, 2});
  const std::vector<std::size_t> short_a{0};
  const std::vector<std::size_t> bad{0, 5};
  EXPECT_THROW(EvaluatePolicy(cf, short_a), Error);
  EXPECT_THROW(EvaluatePolicy(cf, bad), Error);
}

}  // namespace
}  // namespace rxprice
