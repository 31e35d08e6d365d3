#include "rxprice/causal_select.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "rxprice/error.hpp"

namespace rxprice {

std::size_t ActionPartitionedData::samples() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.x.rows());
  return n;
}

std::vector<std::size_t> ActionPartitionedData::ConstantColumns() const {
  std::vector<std::size_t> out;
  if (constant.size() != blocks.size()) return out;
  for (std::size_t k = 0; k < covariates(); ++k) {
    bool all = true;
    for (const auto& flags : constant) all = all && flags[k];
    if (all) out.push_back(k);
  }
  return out;
}

void PenaltyConfig::Validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "penalty lambda must be positive");
  }
  if (kind == PenaltyKind::kMcp && !(gamma > 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "MCP gamma must exceed 1");
  }
  if (kind == PenaltyKind::kScad && !(gamma > 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "SCAD gamma must exceed 2");
  }
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "row-norm ball radius must be positive");
  }
}

double PenaltyConfig::Value(double t) const {
  switch (kind) {
    case PenaltyKind::kL1:
      return lambda * t;
    case PenaltyKind::kMcp:
      if (t <= gamma * lambda) return lambda * t - t * t / (2.0 * gamma);
      return 0.5 * gamma * lambda * lambda;
    case PenaltyKind::kScad:
      if (t <= lambda) return lambda * t;
      if (t <= gamma * lambda) {
        return (2.0 * gamma * lambda * t - t * t - lambda * lambda) /
               (2.0 * (gamma - 1.0));
      }
      return 0.5 * lambda * lambda * (gamma + 1.0);
  }
  return 0.0;
}

ActionPartitionedData Standardize(const ActionPartitionedData& raw) {
  ActionPartitionedData out;
  out.blocks.reserve(raw.blocks.size());
  out.constant.reserve(raw.blocks.size());
  const auto p = raw.covariates();
  for (const auto& block : raw.blocks) {
    if (block.x.rows() == 0) {
      throw Error(ErrorCode::kEmptyBlock, "an action block has no samples");
    }
    if (static_cast<std::size_t>(block.x.cols()) != p || block.y.size() != block.x.rows()) {
      throw Error(ErrorCode::kInvalidArgument, "action blocks disagree on shape");
    }
    ActionBlock b{block.x, block.y};
    std::vector<bool> flags(p, false);
    const double n = static_cast<double>(b.x.rows());
    for (Eigen::Index k = 0; k < b.x.cols(); ++k) {
      auto col = b.x.col(k);
      const double mean = col.mean();
      col.array() -= mean;
      const double var = col.squaredNorm() / n;
      // Relative to the column's magnitude; catches columns like all 5.0.
      if (var <= 1e-24 * std::max(1.0, mean * mean)) {
        col.setZero();
        flags[static_cast<std::size_t>(k)] = true;
      } else {
        col /= std::sqrt(var);
      }
    }
    out.blocks.push_back(std::move(b));
    out.constant.push_back(std::move(flags));
  }
  return out;
}

namespace {

double ProxObjective(double r, double norm, double step, const PenaltyConfig& pen) {
  const double d = r - norm;
  return d * d / (2.0 * step) + pen.Value(r);
}

// Stationary point of a quadratic piece (r - norm)^2/(2 step) + a r - r^2/(2 b)
// clipped to [lo, hi]; falls back to lo when the piece is not strictly convex.
double ClippedStationary(double norm, double step, double a, double b, double lo,
                         double hi) {
  const double curvature = 1.0 / step - 1.0 / b;
  if (!(curvature > 0.0)) return lo;
  const double r = (norm / step - a) / curvature;
  return std::clamp(r, lo, hi);
}

}  // namespace

double GroupProxNorm(double norm, double step, const PenaltyConfig& pen) {
  if (norm <= 0.0) return 0.0;
  const double lam = pen.lambda;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::array<double, 6> candidates{};
  std::size_t count = 0;
  candidates[count++] = 0.0;
  switch (pen.kind) {
    case PenaltyKind::kL1:
      candidates[count++] = std::max(0.0, norm - step * lam);
      break;
    case PenaltyKind::kMcp: {
      const double knot = pen.gamma * lam;
      candidates[count++] = ClippedStationary(norm, step, lam, pen.gamma, 0.0, knot);
      candidates[count++] = knot;
      candidates[count++] = std::max(norm, knot);
      break;
    }
    case PenaltyKind::kScad: {
      const double knot = pen.gamma * lam;
      candidates[count++] = std::clamp(norm - step * lam, 0.0, lam);
      candidates[count++] = lam;
      // middle piece: slope gamma*lam/(gamma-1), curvature 1/(gamma-1)
      candidates[count++] = ClippedStationary(norm, step, knot / (pen.gamma - 1.0),
                                              pen.gamma - 1.0, lam, knot);
      candidates[count++] = knot;
      candidates[count++] = std::max(norm, knot);
      break;
    }
  }
  double best_r = 0.0;
  double best = kInf;
  for (std::size_t c = 0; c < count; ++c) {
    const double value = ProxObjective(candidates[c], norm, step, pen);
    if (value < best || (value == best && candidates[c] < best_r)) {
      best = value;
      best_r = candidates[c];
    }
  }
  return best_r;
}

Eigen::VectorXd GroupProx(const Eigen::VectorXd& row, double step,
                          const PenaltyConfig& pen) {
  const double norm = row.norm();
  if (norm == 0.0) return Eigen::VectorXd::Zero(row.size());
  const double r = GroupProxNorm(norm, step, pen);
  if (r == 0.0) return Eigen::VectorXd::Zero(row.size());
  return row * (r / norm);
}

Eigen::MatrixXd ProjectRowNormBall(const Eigen::MatrixXd& theta, double radius) {
  if (!std::isfinite(radius)) return theta;
  const Eigen::VectorXd norms = theta.rowwise().norm();
  if (norms.sum() <= radius) return theta;
  // Project the norm vector onto the l1 ball (sort-based simplex projection).
  std::vector<double> sorted(norms.data(), norms.data() + norms.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) shift = candidate;
  }
  Eigen::MatrixXd out = theta;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const double target = std::max(0.0, norms[i] - shift);
    if (norms[i] > 0.0) out.row(i) *= target / norms[i];
  }
  return out;
}

double LargestEigenvalue(const Eigen::MatrixXd& sym, std::size_t max_iter, double tol) {
  if (sym.rows() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(sym.rows()) / std::sqrt(double(sym.rows()));
  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = sym * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = w.dot(sym * w);
    v = std::move(w);
    if (std::abs(next - estimate) <= tol * std::max(1.0, std::abs(next))) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  // Power iteration approaches the top eigenvalue from below; the Gershgorin
  // bound keeps 1/L a valid step even if it has not converged.
  double gershgorin = 0.0;
  for (Eigen::Index i = 0; i < sym.rows(); ++i) {
    gershgorin = std::max(gershgorin, sym.row(i).cwiseAbs().sum());
  }
  return std::min(gershgorin, estimate * (1.0 + 1e-6) + 1e-12);
}

namespace {

struct Quadratic {
  std::vector<Eigen::MatrixXd> gram;  // X_j^T X_j / n
  Eigen::MatrixXd linear;             // column j = X_j^T y_j / n
};

Quadratic BuildQuadratic(const ActionPartitionedData& data) {
  const double n = static_cast<double>(data.samples());
  Quadratic q;
  q.linear.resize(static_cast<Eigen::Index>(data.covariates()),
                  static_cast<Eigen::Index>(data.actions()));
  for (std::size_t j = 0; j < data.actions(); ++j) {
    const auto& b = data.blocks[j];
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(b.x.cols(), b.x.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(b.x.transpose());
    g = g.selfadjointView<Eigen::Lower>();
    q.gram.push_back(g / n);
    q.linear.col(static_cast<Eigen::Index>(j)) = b.x.transpose() * b.y / n;
  }
  return q;
}

double Objective(const Quadratic& q, const Eigen::MatrixXd& theta,
                 const PenaltyConfig& pen) {
  double value = 0.0;
  for (std::size_t j = 0; j < q.gram.size(); ++j) {
    const auto col = theta.col(static_cast<Eigen::Index>(j));
    value += 0.5 * col.dot(q.gram[j] * col) - q.linear.col(static_cast<Eigen::Index>(j)).dot(col);
  }
  for (Eigen::Index i = 0; i < theta.rows(); ++i) value += pen.Value(theta.row(i).norm());
  return value;
}

}  // namespace

double GroupSparseObjective(const ActionPartitionedData& data,
                            const Eigen::MatrixXd& theta, const PenaltyConfig& pen) {
  return Objective(BuildQuadratic(data), theta, pen);
}

SelectionResult FitGroupSparse(const ActionPartitionedData& data,
                               const PenaltyConfig& pen,
                               const GroupSparseOptions& options) {
  pen.Validate();
  if (!(options.tol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerance must be positive");
  }
  if (data.blocks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no action blocks");
  }
  const auto p = static_cast<Eigen::Index>(data.covariates());
  const auto q = static_cast<Eigen::Index>(data.actions());
  const Quadratic quad = BuildQuadratic(data);

  double lipschitz = 0.0;
  for (const auto& g : quad.gram) lipschitz = std::max(lipschitz, LargestEigenvalue(g));

  SelectionResult result;
  result.theta = Eigen::MatrixXd::Zero(p, q);
  result.constant_columns = data.ConstantColumns();
  std::vector<bool> frozen(static_cast<std::size_t>(p), false);
  for (auto k : result.constant_columns) frozen[k] = true;

  result.objective_history.push_back(Objective(quad, result.theta, pen));
  if (lipschitz > 0.0) {
    const double step = 1.0 / lipschitz;
    Eigen::MatrixXd grad(p, q);
    for (std::size_t it = 0; it < options.max_iter; ++it) {
      for (Eigen::Index j = 0; j < q; ++j) {
        grad.col(j) = quad.gram[static_cast<std::size_t>(j)] * result.theta.col(j) - quad.linear.col(j);
      }
      Eigen::MatrixXd next = result.theta - step * grad;
      for (Eigen::Index i = 0; i < p; ++i) {
        if (frozen[static_cast<std::size_t>(i)]) {
          next.row(i).setZero();
          continue;
        }
        next.row(i) = GroupProx(next.row(i).transpose(), step, pen).transpose();
      }
      next = ProjectRowNormBall(next, pen.radius);

      const double value = Objective(quad, next, pen);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kNonFinite,
                    "objective is not finite; check covariate scaling");
      }
      const double change = (next - result.theta).norm() /
                            std::max(1.0, result.theta.norm());
      result.theta = std::move(next);
      result.objective_history.push_back(value);
      result.iterations = it + 1;
      if (change < options.tol) {
        result.converged = true;
        break;
      }
    }
  } else {
    result.converged = true;  // all-zero design: theta = 0 is optimal
  }

  result.row_norms = result.theta.rowwise().norm();
  result.support = ExtractSupport(result, options.support_threshold);
  return result;
}

std::vector<std::size_t> ExtractSupport(const SelectionResult& result, double threshold) {
  if (threshold < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "support threshold must be nonnegative");
  }
  std::vector<std::size_t> support;
  for (Eigen::Index i = 0; i < result.row_norms.size(); ++i) {
    if (result.row_norms[i] > threshold) support.push_back(static_cast<std::size_t>(i));
  }
  return support;
}

double DefaultLambda(std::size_t covariates, std::size_t actions, std::size_t samples,
                     double scale) {
  const double p = std::max<double>(2.0, static_cast<double>(covariates));
  const double k = std::max<double>(1.0, static_cast<double>(actions));
  const double n = std::max<double>(1.0, static_cast<double>(samples));
  return scale * std::sqrt(k * std::log(p) / n);
}

SelectionDesign EncodeForSelection(const ObservationSet& observations) {
  SelectionDesign design;
  std::vector<std::size_t> first_column(observations.schema.size());
  for (std::size_t f = 0; f < observations.schema.size(); ++f) {
    first_column[f] = design.column_feature.size();
    const auto levels = observations.schema[f].levels.size();
    for (std::size_t l = 1; l < levels; ++l) design.column_feature.push_back(f);
  }
  const auto p = static_cast<Eigen::Index>(design.column_feature.size());

  std::vector<std::vector<std::size_t>> rows_by_price(observations.price_grid.size());
  for (std::size_t i = 0; i < observations.rows.size(); ++i) {
    const auto k = observations.PriceIndex(observations.rows[i].price);
    if (!k) {
      throw Error(ErrorCode::kInvalidArgument, "observed price is not on the price grid");
    }
    rows_by_price[*k].push_back(i);
  }
  for (std::size_t k = 0; k < rows_by_price.size(); ++k) {
    const auto& members = rows_by_price[k];
    if (members.empty()) continue;
    ActionBlock block;
    block.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(members.size()), p);
    block.y.resize(static_cast<Eigen::Index>(members.size()));
    for (std::size_t r = 0; r < members.size(); ++r) {
      const auto& obs = observations.rows[members[r]];
      for (std::size_t f = 0; f < obs.levels.size(); ++f) {
        if (obs.levels[f] > 0) {
          block.x(static_cast<Eigen::Index>(r),
                  static_cast<Eigen::Index>(first_column[f] + obs.levels[f] - 1)) = 1.0;
        }
      }
      block.y[static_cast<Eigen::Index>(r)] = obs.purchased;
    }
    design.data.blocks.push_back(std::move(block));
    design.action_price_index.push_back(k);
  }
  return design;
}

std::vector<std::size_t> FeatureSupport(const std::vector<std::size_t>& columns,
                                        const std::vector<std::size_t>& column_feature) {
  std::vector<std::size_t> features;
  for (auto c : columns) features.push_back(column_feature.at(c));
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  return features;
}

}  // namespace rxprice
