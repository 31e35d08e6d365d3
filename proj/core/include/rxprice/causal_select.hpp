#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rxprice/observation.hpp"

namespace rxprice {

// Design matrix and outcome for the samples that received one action.
struct ActionBlock {
  Eigen::MatrixXd x;  // n_j x p
  Eigen::VectorXd y;  // n_j
};

// Samples partitioned by the action (price) they received. All blocks share
// the same covariate count.
struct ActionPartitionedData {
  std::vector<ActionBlock> blocks;
  // constant[j][k] is set by Standardize when column k of block j had zero
  // variance and was zeroed.
  std::vector<std::vector<bool>> constant;

  std::size_t covariates() const {
    return blocks.empty() ? 0 : static_cast<std::size_t>(blocks.front().x.cols());
  }
  std::size_t actions() const { return blocks.size(); }
  std::size_t samples() const;

  // Columns that are constant in every block. They can never be selected.
  std::vector<std::size_t> ConstantColumns() const;
};

enum class PenaltyKind { kMcp, kScad, kL1 };

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::kMcp;
  double lambda = 0.1;
  double gamma = 3.0;  // MCP needs > 1, SCAD > 2; unused for L1
  double radius = std::numeric_limits<double>::infinity();

  void Validate() const;
  // rho_lambda(t) for t >= 0.
  double Value(double t) const;
};

struct SelectionResult {
  Eigen::MatrixXd theta;  // p x q
  std::vector<std::size_t> support;
  Eigen::VectorXd row_norms;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::size_t> constant_columns;
  // Objective value after every iteration, starting with the initial iterate.
  std::vector<double> objective_history;
};

struct GroupSparseOptions {
  double tol = 1e-7;
  std::size_t max_iter = 5000;
  double support_threshold = 1e-6;
};

// Centers and scales every column of every block to mean 0 and (population)
// variance 1. Zero-variance columns are zeroed and flagged in `constant`.
ActionPartitionedData Standardize(const ActionPartitionedData& raw);

// Proximal operator of step * rho_lambda(||.||_2) evaluated at `row`. The
// result is always a nonnegative multiple of `row`.
Eigen::VectorXd GroupProx(const Eigen::VectorXd& row, double step,
                          const PenaltyConfig& pen);

// Scalar version: minimiser over r >= 0 of (r - norm)^2 / (2 step) + rho(r).
double GroupProxNorm(double norm, double step, const PenaltyConfig& pen);

// Euclidean projection of theta onto {||theta||_{1,2} <= radius}.
Eigen::MatrixXd ProjectRowNormBall(const Eigen::MatrixXd& theta, double radius);

// Largest eigenvalue of a symmetric positive semidefinite matrix by power
// iteration.
double LargestEigenvalue(const Eigen::MatrixXd& sym, std::size_t max_iter = 50,
                         double tol = 1e-9);

// Smooth quadratic loss plus the row-norm penalty, with n the total sample
// count.
double GroupSparseObjective(const ActionPartitionedData& data,
                            const Eigen::MatrixXd& theta,
                            const PenaltyConfig& pen);

// Proximal gradient descent on the row-sparse multi-action regression.
// Expects standardized data.
SelectionResult FitGroupSparse(const ActionPartitionedData& data,
                               const PenaltyConfig& pen,
                               const GroupSparseOptions& options = {});

// Indices (0-based, ascending) whose row norm is strictly above threshold.
std::vector<std::size_t> ExtractSupport(const SelectionResult& result,
                                        double threshold);

// lambda = scale * sqrt(K * log(p) / n) for K price actions. The row norm
// spans K blocks, so pure-noise rows grow like sqrt(K).
double DefaultLambda(std::size_t covariates, std::size_t actions,
                     std::size_t samples, double scale = 1.0);

// One-hot (reference level dropped) encoding of an observation set, blocked
// by the grid price each row received. Prices without samples are skipped.
struct SelectionDesign {
  ActionPartitionedData data;
  std::vector<std::size_t> column_feature;  // column -> schema index
  std::vector<std::size_t> action_price_index;  // block -> price grid index
};

SelectionDesign EncodeForSelection(const ObservationSet& observations);

// Schema indices owning at least one selected column.
std::vector<std::size_t> FeatureSupport(const std::vector<std::size_t>& columns,
                                        const std::vector<std::size_t>& column_feature);

}  // namespace rxprice
