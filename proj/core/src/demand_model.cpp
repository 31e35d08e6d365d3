#include "rxprice/demand_model.hpp"

#include <algorithm>
#include <cmath>

#include "rxprice/error.hpp"

namespace rxprice {

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

Eigen::VectorXd PenaltyMask(const std::vector<bool>& penalized, Eigen::Index d) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) mask[k] = penalized[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
  return mask;
}

}  // namespace

double LogisticProblem::Loss(const Eigen::VectorXd& weights) const {
  const Eigen::VectorXd eta = design * weights;
  const double n = static_cast<double>(design.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) loss += Softplus(eta[i]) - outcome[i] * eta[i];
  const Eigen::VectorXd mask = PenaltyMask(penalized, weights.size());
  return loss / n + 0.5 * reg * (mask.array() * weights.array().square()).sum();
}

Eigen::VectorXd LogisticProblem::Gradient(const Eigen::VectorXd& weights) const {
  const Eigen::VectorXd eta = design * weights;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = Sigmoid(eta[i]) - outcome[i];
  const double n = static_cast<double>(design.rows());
  const Eigen::VectorXd mask = PenaltyMask(penalized, weights.size());
  return design.transpose() * residual / n + reg * mask.cwiseProduct(weights);
}

Eigen::MatrixXd LogisticProblem::Hessian(const Eigen::VectorXd& weights) const {
  const Eigen::VectorXd eta = design * weights;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double s = Sigmoid(eta[i]);
    w[i] = s * (1.0 - s);
  }
  const double n = static_cast<double>(design.rows());
  Eigen::MatrixXd h = design.transpose() * w.asDiagonal() * design / n;
  h.diagonal() += reg * PenaltyMask(penalized, weights.size());
  return h;
}

NewtonResult MinimizeLogistic(const LogisticProblem& problem, double tol,
                              std::size_t max_iter) {
  NewtonResult out;
  out.weights = Eigen::VectorXd::Zero(problem.design.cols());
  double loss = problem.Loss(out.weights);
  Eigen::VectorXd grad = problem.Gradient(out.weights);
  out.gradient_norm = grad.norm();
  while (out.gradient_norm >= tol && out.iterations < max_iter) {
    Eigen::MatrixXd h = problem.Hessian(out.weights);
    // Tiny ridge keeps the step defined for separable or collinear data.
    h.diagonal().array() += 1e-12;
    Eigen::VectorXd step = h.ldlt().solve(-grad);
    if (!step.allFinite() || grad.dot(step) >= 0.0) step = -grad;
    double t = 1.0;
    Eigen::VectorXd candidate = out.weights + step;
    double candidate_loss = problem.Loss(candidate);
    while (candidate_loss > loss + 1e-4 * t * grad.dot(step) && t > 1e-12) {
      t *= 0.5;
      candidate = out.weights + t * step;
      candidate_loss = problem.Loss(candidate);
    }
    ++out.iterations;
    if (!(candidate_loss <= loss)) break;  // no further progress possible
    out.weights = std::move(candidate);
    loss = candidate_loss;
    grad = problem.Gradient(out.weights);
    out.gradient_norm = grad.norm();
  }
  return out;
}

double DemandFit::Logit(std::span<const std::size_t> levels, double price) const {
  double z = intercept + price_coef * price;
  for (std::size_t s = 0; s < selected_features.size(); ++s) {
    z += level_weights[s][levels[selected_features[s]]];
  }
  return z;
}

double DemandFit::Probability(std::span<const std::size_t> levels, double price) const {
  constexpr double kEdge = 1e-12;
  return std::clamp(Sigmoid(Logit(levels, price)), kEdge, 1.0 - kEdge);
}

namespace {

double PriceScale(const ObservationSet& data) {
  const double mid = 0.5 * (data.price_grid.front() + data.price_grid.back());
  return mid > 0.0 ? mid : 1.0;
}

}  // namespace

LogisticProblem BuildDemandProblem(const ObservationSet& data,
                                   const std::vector<std::size_t>& selected,
                                   double reg) {
  Eigen::Index d = 2;
  for (auto f : selected) d += static_cast<Eigen::Index>(data.schema.at(f).levels.size());
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  const double scale = PriceScale(data);

  LogisticProblem problem;
  problem.reg = reg;
  problem.design = Eigen::MatrixXd::Zero(n, d);
  problem.outcome.resize(n);
  problem.penalized.assign(static_cast<std::size_t>(d), true);
  // Intercept and price stay unpenalized: scaled price varies little, so
  // even a small ridge would flatten the demand curve.
  problem.penalized.front() = false;
  problem.penalized.back() = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    problem.design(i, 0) = 1.0;
    Eigen::Index offset = 1;
    for (auto f : selected) {
      problem.design(i, offset + static_cast<Eigen::Index>(row.levels[f])) = 1.0;
      offset += static_cast<Eigen::Index>(data.schema[f].levels.size());
    }
    problem.design(i, d - 1) = row.price / scale;
    problem.outcome[i] = row.purchased;
  }
  return problem;
}

DemandFit FitDemand(const ObservationSet& data, const std::vector<std::size_t>& selected,
                    const DemandOptions& options) {
  if (data.rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot fit demand on an empty observation set");
  }
  for (auto f : selected) {
    if (f >= data.schema.size()) {
      throw Error(ErrorCode::kInvalidArgument, "selected feature outside the schema");
    }
  }
  if (options.reg < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "regularisation must be nonnegative");
  }

  DemandFit fit;
  fit.selected_features = selected;
  for (auto f : selected) fit.level_weights.emplace_back(data.schema[f].levels.size(), 0.0);

  std::size_t positives = 0;
  for (const auto& row : data.rows) positives += static_cast<std::size_t>(row.purchased);
  if (positives == 0 || positives == data.rows.size()) {
    // Outcomes carry no signal: intercept-only fit pinned near the observed rate.
    fit.degenerate = true;
    fit.intercept = positives == 0 ? -10.0 : 10.0;
    const double prob = Sigmoid(fit.intercept);
    const double y = positives == 0 ? 0.0 : 1.0;
    fit.train_log_loss = -(y * std::log(prob) + (1.0 - y) * std::log1p(-prob));
    return fit;
  }

  const LogisticProblem problem = BuildDemandProblem(data, selected, options.reg);
  const NewtonResult solved = MinimizeLogistic(problem, options.tol, options.max_iter);
  const double scale = PriceScale(data);

  fit.intercept = solved.weights[0];
  Eigen::Index offset = 1;
  for (auto& weights : fit.level_weights) {
    for (auto& w : weights) w = solved.weights[offset++];
  }
  fit.price_coef = solved.weights[offset] / scale;
  fit.gradient_norm = solved.gradient_norm;
  fit.iterations = solved.iterations;

  double loss = 0.0;
  for (const auto& row : data.rows) {
    const double prob = fit.Probability(row.levels, row.price);
    loss -= row.purchased ? std::log(prob) : std::log1p(-prob);
  }
  fit.train_log_loss = loss / static_cast<double>(data.rows.size());
  return fit;
}

CounterfactualMatrix CounterfactualsFromProbabilities(Eigen::MatrixXd f,
                                                      std::vector<double> price_grid) {
  if (static_cast<std::size_t>(f.cols()) != price_grid.size()) {
    throw Error(ErrorCode::kInvalidArgument, "probability table does not match the grid");
  }
  CounterfactualMatrix cf;
  cf.g.resize(f.rows(), f.cols());
  for (Eigen::Index k = 0; k < f.cols(); ++k) {
    cf.g.col(k) = price_grid[static_cast<std::size_t>(k)] * f.col(k);
  }
  cf.f = std::move(f);
  cf.price_grid = std::move(price_grid);
  return cf;
}

CounterfactualMatrix Counterfactuals(const DemandFit& fit, const ObservationSet& data) {
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  const auto k = static_cast<Eigen::Index>(data.price_grid.size());
  Eigen::MatrixXd f(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& levels = data.rows[static_cast<std::size_t>(i)].levels;
    for (Eigen::Index c = 0; c < k; ++c) {
      f(i, c) = fit.Probability(levels, data.price_grid[static_cast<std::size_t>(c)]);
    }
  }
  return CounterfactualsFromProbabilities(std::move(f), data.price_grid);
}

namespace {

void CheckAssignment(const CounterfactualMatrix& cf, std::span<const std::size_t> a) {
  if (a.size() != cf.samples()) {
    throw Error(ErrorCode::kInvalidArgument, "assignment length does not match sample count");
  }
  for (auto k : a) {
    if (k >= cf.prices()) throw Error(ErrorCode::kInvalidArgument, "price index out of range");
  }
}

double MeanRevenue(const CounterfactualMatrix& cf, std::span<const std::size_t> a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += cf.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a[i]));
  }
  return a.empty() ? 0.0 : total / static_cast<double>(a.size());
}

}  // namespace

KpiReport EvaluatePolicy(const CounterfactualMatrix& cf,
                         std::span<const std::size_t> assignment,
                         std::optional<std::span<const std::size_t>> base) {
  CheckAssignment(cf, assignment);
  KpiReport report;
  report.requests = assignment.size();
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    report.expected_bookings +=
        cf.f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i]));
  }
  report.revenue_per_request = MeanRevenue(cf, assignment);
  report.conversion_rate =
      assignment.empty() ? 0.0 : report.expected_bookings / static_cast<double>(assignment.size());
  if (base) {
    CheckAssignment(cf, *base);
    const double base_revenue = MeanRevenue(cf, *base);
    if (base_revenue > 0.0) {
      report.uplift = std::equal(assignment.begin(), assignment.end(), base->begin())
                          ? 0.0
                          : (report.revenue_per_request - base_revenue) / base_revenue;
    }
  }
  return report;
}

}  // namespace rxprice
