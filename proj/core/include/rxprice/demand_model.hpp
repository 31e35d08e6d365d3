#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rxprice/observation.hpp"

namespace rxprice {

// Penalised mean log loss of a logistic model. Column `d` of `design` is
// penalised iff penalized[d].
struct LogisticProblem {
  Eigen::MatrixXd design;
  Eigen::VectorXd outcome;
  std::vector<bool> penalized;
  double reg = 0.0;

  double Loss(const Eigen::VectorXd& weights) const;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& weights) const;
  Eigen::MatrixXd Hessian(const Eigen::VectorXd& weights) const;
};

struct NewtonResult {
  Eigen::VectorXd weights;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

// Damped Newton until ||gradient||_2 < tol or max_iter steps.
NewtonResult MinimizeLogistic(const LogisticProblem& problem, double tol = 1e-7,
                              std::size_t max_iter = 10000);

double Sigmoid(double z);

// Logistic demand curve over one-hot encoded features and a linear price
// term. Coefficients are in raw units: logit = intercept + sum of level
// weights + price_coef * price.
struct DemandFit {
  std::vector<std::size_t> selected_features;
  // level_weights[s][l]: weight of level l of selected_features[s]
  std::vector<std::vector<double>> level_weights;
  double intercept = 0.0;
  double price_coef = 0.0;
  double train_log_loss = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool degenerate = false;

  double Logit(std::span<const std::size_t> levels, double price) const;
  // Purchase probability, kept strictly inside (0, 1).
  double Probability(std::span<const std::size_t> levels, double price) const;
};

struct DemandOptions {
  double reg = 1e-3;
  double tol = 1e-7;
  std::size_t max_iter = 10000;
};

// Builds the penalised logistic problem used by FitDemand. Price enters
// divided by the grid midpoint; the intercept column comes first and the
// price column last. Only the level weights are penalized.
LogisticProblem BuildDemandProblem(const ObservationSet& data,
                                   const std::vector<std::size_t>& selected,
                                   double reg);

DemandFit FitDemand(const ObservationSet& data, const std::vector<std::size_t>& selected,
                    const DemandOptions& options = {});

// f[i][k] = P(purchase | x_i, grid[k]); g[i][k] = grid[k] * f[i][k].
struct CounterfactualMatrix {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  std::vector<double> price_grid;

  std::size_t samples() const { return static_cast<std::size_t>(f.rows()); }
  std::size_t prices() const { return price_grid.size(); }
};

CounterfactualMatrix Counterfactuals(const DemandFit& fit, const ObservationSet& data);

// Builds the matrix from a purchase-probability table.
CounterfactualMatrix CounterfactualsFromProbabilities(Eigen::MatrixXd f,
                                                      std::vector<double> price_grid);

struct KpiReport {
  double revenue_per_request = 0.0;
  double conversion_rate = 0.0;
  // (revenue - base revenue) / base revenue; empty when base revenue is 0
  std::optional<double> uplift;
  std::size_t requests = 0;
  double expected_bookings = 0.0;
};

// KPIs of a per-sample price assignment, averaged per booking request.
KpiReport EvaluatePolicy(const CounterfactualMatrix& cf,
                         std::span<const std::size_t> assignment,
                         std::optional<std::span<const std::size_t>> base = std::nullopt);

}  // namespace rxprice
