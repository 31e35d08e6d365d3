#include "rxprice/simplex.hpp"

#include <algorithm>
#include <limits>

#include "rxprice/error.hpp"

namespace rxprice {
namespace {

// Revised simplex state over the columns of `a`, restricted to columns whose
// `allowed` flag is set when choosing entering variables.
class RevisedSimplex {
 public:
  RevisedSimplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                 std::vector<Eigen::Index> basis, const SimplexOptions& options)
      : a_(a), b_(b), basis_(std::move(basis)), options_(options) {
    in_basis_.assign(static_cast<std::size_t>(a_.cols()), false);
    for (auto j : basis_) in_basis_[static_cast<std::size_t>(j)] = true;
    Refactor();
  }

  // Runs to optimality for objective `c`; columns with allowed[j] == false
  // never enter.
  LpStatus Optimize(const Eigen::VectorXd& c, const std::vector<bool>& allowed,
                    std::size_t& iterations) {
    const auto m = a_.rows();
    while (true) {
      if (iterations >= options_.max_iterations) return LpStatus::kIterationLimit;
      Eigen::VectorXd cb(m);
      for (Eigen::Index r = 0; r < m; ++r) cb[r] = c[basis_[static_cast<std::size_t>(r)]];
      const Eigen::RowVectorXd y = cb.transpose() * binv_;

      // Bland: lowest-index improving column.
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < a_.cols(); ++j) {
        if (in_basis_[static_cast<std::size_t>(j)] || !allowed[static_cast<std::size_t>(j)]) continue;
        if (c[j] - y.dot(a_.col(j)) > options_.tol) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return LpStatus::kOptimal;

      const Eigen::VectorXd w = binv_ * a_.col(entering);
      Eigen::Index leaving_row = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < m; ++r) {
        if (w[r] <= options_.tol) continue;
        const double ratio = std::max(0.0, xb_[r]) / w[r];
        const bool better = ratio < best_ratio - 1e-12;
        const bool tie = !better && ratio <= best_ratio + 1e-12 && leaving_row >= 0 &&
                         basis_[static_cast<std::size_t>(r)] <
                             basis_[static_cast<std::size_t>(leaving_row)];
        if (better || tie) {
          best_ratio = std::min(best_ratio, ratio);
          leaving_row = r;
        }
      }
      if (leaving_row < 0) return LpStatus::kUnbounded;
      Pivot(leaving_row, entering, w);
      ++iterations;
    }
  }

  void Pivot(Eigen::Index row, Eigen::Index entering, const Eigen::VectorXd& w) {
    const double pivot = w[row];
    binv_.row(row) /= pivot;
    xb_[row] /= pivot;
    for (Eigen::Index r = 0; r < binv_.rows(); ++r) {
      if (r == row || w[r] == 0.0) continue;
      binv_.row(r) -= w[r] * binv_.row(row);
      xb_[r] -= w[r] * xb_[row];
    }
    in_basis_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(row)])] = false;
    basis_[static_cast<std::size_t>(row)] = entering;
    in_basis_[static_cast<std::size_t>(entering)] = true;
    if (++since_refactor_ >= options_.refactor_every) Refactor();
  }

  void Refactor() {
    const auto m = a_.rows();
    Eigen::MatrixXd basis_matrix(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
      basis_matrix.col(r) = a_.col(basis_[static_cast<std::size_t>(r)]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    since_refactor_ = 0;
  }

  const std::vector<Eigen::Index>& basis() const { return basis_; }
  const Eigen::MatrixXd& binv() const { return binv_; }
  const Eigen::VectorXd& xb() const { return xb_; }

 private:
  const Eigen::MatrixXd& a_;
  const Eigen::VectorXd& b_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> in_basis_;
  SimplexOptions options_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  std::size_t since_refactor_ = 0;
};

LpSolution Finish(const RevisedSimplex& simplex, const Eigen::VectorXd& c,
                  Eigen::Index n, LpStatus status, std::size_t iterations) {
  LpSolution sol;
  sol.status = status;
  sol.iterations = iterations;
  sol.x = Eigen::VectorXd::Zero(n);
  const auto& basis = simplex.basis();
  const auto m = static_cast<Eigen::Index>(basis.size());
  Eigen::VectorXd cb(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto j = basis[static_cast<std::size_t>(r)];
    cb[r] = j < c.size() ? c[j] : 0.0;
    if (j < n) sol.x[j] = std::max(0.0, simplex.xb()[r]);
  }
  sol.duals = (cb.transpose() * simplex.binv()).transpose();
  sol.objective = c.head(n).dot(sol.x);
  sol.basis = basis;
  return sol;
}

}  // namespace

LpSolution SolveLp(const LinearProgram& lp, const SimplexOptions& options,
                   const std::optional<std::vector<Eigen::Index>>& start_basis) {
  const auto m = lp.a.rows();
  const auto n = lp.a.cols();
  if (lp.b.size() != m || lp.c.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "linear program dimensions disagree");
  }
  std::size_t iterations = 0;

  if (start_basis) {
    if (static_cast<Eigen::Index>(start_basis->size()) != m) {
      throw Error(ErrorCode::kInvalidArgument, "start basis needs one column per row");
    }
    RevisedSimplex simplex(lp.a, lp.b, *start_basis, options);
    const std::vector<bool> allowed(static_cast<std::size_t>(n), true);
    const auto status = simplex.Optimize(lp.c, allowed, iterations);
    return Finish(simplex, lp.c, n, status, iterations);
  }

  // Phase one on [A | I] with rows sign-normalised so that b >= 0.
  Eigen::MatrixXd a(m, n + m);
  Eigen::VectorXd b = lp.b;
  a.leftCols(n) = lp.a;
  a.rightCols(m).setIdentity();
  for (Eigen::Index r = 0; r < m; ++r) {
    if (b[r] < 0.0) {
      a.row(r).head(n) *= -1.0;
      b[r] = -b[r];
    }
  }
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) basis[static_cast<std::size_t>(r)] = n + r;
  RevisedSimplex simplex(a, b, basis, options);

  Eigen::VectorXd phase_one = Eigen::VectorXd::Zero(n + m);
  phase_one.tail(m).setConstant(-1.0);
  std::vector<bool> allowed(static_cast<std::size_t>(n + m), true);
  auto status = simplex.Optimize(phase_one, allowed, iterations);
  if (status == LpStatus::kIterationLimit) {
    return Finish(simplex, Eigen::VectorXd::Zero(n + m), n, status, iterations);
  }
  double infeasibility = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (simplex.basis()[static_cast<std::size_t>(r)] >= n) infeasibility += simplex.xb()[r];
  }
  if (infeasibility > 1e-7 * std::max(1.0, b.lpNorm<1>())) {
    LpSolution sol;
    sol.status = LpStatus::kInfeasible;
    sol.iterations = iterations;
    return sol;
  }

  // Pivot remaining (zero-valued) artificials out where a structural column
  // can replace them; the rest sit on redundant rows and stay at zero.
  for (Eigen::Index r = 0; r < m; ++r) {
    if (simplex.basis()[static_cast<std::size_t>(r)] < n) continue;
    const Eigen::RowVectorXd row = simplex.binv().row(r) * a.leftCols(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& bs = simplex.basis();
      if (std::find(bs.begin(), bs.end(), j) != bs.end()) continue;
      if (std::abs(row[j]) > 1e-7) {
        simplex.Pivot(r, j, simplex.binv() * a.col(j));
        break;
      }
    }
  }

  for (Eigen::Index r = 0; r < m; ++r) allowed[static_cast<std::size_t>(n + r)] = false;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n + m);
  cost.head(n) = lp.c;
  status = simplex.Optimize(cost, allowed, iterations);
  LpSolution sol = Finish(simplex, cost, n, status, iterations);
  // Undo the sign flips on the duals.
  for (Eigen::Index r = 0; r < m; ++r) {
    if (lp.b[r] < 0.0) sol.duals[r] = -sol.duals[r];
  }
  return sol;
}

}  // namespace rxprice
