#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rxprice {

// maximize c^T x  subject to  A x = b,  x >= 0
struct LinearProgram {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::kIterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;  // y with c - A^T y <= 0 at optimality
  double objective = 0.0;
  std::vector<Eigen::Index> basis;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double tol = 1e-9;
  std::size_t max_iterations = 100000;
  std::size_t refactor_every = 64;
};

// Dense revised simplex with Bland's rule. When `start_basis` is given it must
// be a primal feasible basis (one column per row); otherwise a phase-one
// problem with artificial variables finds one.
LpSolution SolveLp(const LinearProgram& lp, const SimplexOptions& options = {},
                   const std::optional<std::vector<Eigen::Index>>& start_basis = std::nullopt);

}  // namespace rxprice
