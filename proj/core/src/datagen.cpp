#include "rxprice/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "rxprice/error.hpp"

namespace rxprice {
namespace {

// Uniform [0, 1) from the top 53 bits; avoids implementation-defined
// std distributions so output is identical across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  std::size_t Index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(Uniform() * static_cast<double>(n)));
  }
  double Sign() { return Uniform() < 0.5 ? -1.0 : 1.0; }

 private:
  std::mt19937_64 engine_;
};

std::vector<double> CenteredLevels(std::size_t count) {
  // Uniform over levels: standardize the level index to mean 0, variance 1.
  const double mean = 0.5 * static_cast<double>(count - 1);
  const double sd = std::sqrt((static_cast<double>(count * count) - 1.0) / 12.0);
  std::vector<double> v(count);
  for (std::size_t l = 0; l < count; ++l) v[l] = (static_cast<double>(l) - mean) / sd;
  return v;
}

}  // namespace

FeatureSchema GridSchema() {
  return {
      {kAdvancePurchase, {"0-6", "7-20", "21+"}},
      {kStayRestriction, {"none", "saturday_night"}},
      {kFareDiscount, {"full", "discount", "deep_discount"}},
  };
}

double GroundTruth::Logit(const std::vector<std::size_t>& levels, double price) const {
  double z = intercept + price_slope * price;
  for (auto k : true_support) z += effects[k] * level_values[k][levels[k]];
  return z;
}

double GroundTruth::Probability(const std::vector<std::size_t>& levels, double price) const {
  return Sigmoid(Logit(levels, price));
}

std::pair<ObservationSet, GroundTruth> Generate(const DatagenConfig& config) {
  const std::size_t p = config.covariates;
  if (p < 3 || config.treatment_only + config.confounders + config.predictors > p) {
    throw Error(ErrorCode::kBadPartition,
                "covariate partition does not fit: need p >= 3 and |X1|+|X2|+|X3| <= p");
  }
  if (config.samples == 0) throw Error(ErrorCode::kBadPartition, "need at least one sample");
  if (config.price_grid.empty() || !(config.price_slope < 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need a price grid and a negative price slope");
  }

  ObservationSet data;
  data.market = config.market;
  data.schema = GridSchema();
  for (std::size_t k = 3; k < p; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "x%03zu", k + 1);
    data.schema.push_back({name, {"0", "1"}});
  }
  data.price_grid = config.price_grid;
  std::sort(data.price_grid.begin(), data.price_grid.end());

  GroundTruth truth;
  truth.seed = config.seed;
  truth.price_slope = config.price_slope;
  truth.confounding = config.confounding;
  truth.effects.assign(p, 0.0);
  truth.propensity_weights.assign(p, 0.0);
  for (const auto& feature : data.schema) truth.level_values.push_back(CenteredLevels(feature.levels.size()));

  // Layout: X2 first (so the grid features are confounders when |X2| >= 3),
  // then X3, then X1, then noise.
  std::size_t next = 0;
  for (std::size_t k = 0; k < config.confounders; ++k) truth.confounders.push_back(next++);
  for (std::size_t k = 0; k < config.predictors; ++k) truth.predictors.push_back(next++);
  for (std::size_t k = 0; k < config.treatment_only; ++k) truth.treatment_only.push_back(next++);
  truth.true_support = truth.confounders;
  truth.true_support.insert(truth.true_support.end(), truth.predictors.begin(), truth.predictors.end());
  std::sort(truth.true_support.begin(), truth.true_support.end());

  Stream params(config.seed * 0x9E3779B97F4A7C15ULL + 17);
  for (auto k : truth.true_support) {
    truth.effects[k] = params.Sign() * params.Uniform(config.effect_min, config.effect_max);
  }
  for (auto k : truth.confounders) {
    truth.propensity_weights[k] = params.Sign() * params.Uniform(config.propensity_min, config.propensity_max);
  }
  for (auto k : truth.treatment_only) {
    truth.propensity_weights[k] = params.Sign() * params.Uniform(config.propensity_min, config.propensity_max);
  }
  truth.intercept = -config.price_slope * config.reference_price;

  Stream draws(config.seed);
  const std::size_t grid = data.price_grid.size();
  const double half = grid > 1 ? 0.5 * static_cast<double>(grid - 1) : 1.0;
  std::vector<double> logits(grid);
  data.rows.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    Observation row;
    row.levels.resize(p);
    for (std::size_t k = 0; k < p; ++k) row.levels[k] = draws.Index(data.schema[k].levels.size());

    double shift = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      if (truth.propensity_weights[k] != 0.0) {
        shift += truth.propensity_weights[k] * truth.level_values[k][row.levels[k]];
      }
    }
    double max_logit = -1e300;
    for (std::size_t c = 0; c < grid; ++c) {
      logits[c] = config.confounding * shift * (static_cast<double>(c) - half) / half;
      max_logit = std::max(max_logit, logits[c]);
    }
    double total = 0.0;
    for (auto& l : logits) total += (l = std::exp(l - max_logit));
    double u = draws.Uniform() * total;
    std::size_t chosen = grid - 1;
    for (std::size_t c = 0; c < grid; ++c) {
      if (u < logits[c]) {
        chosen = c;
        break;
      }
      u -= logits[c];
    }
    row.price = data.price_grid[chosen];
    row.purchased = draws.Uniform() < truth.Probability(row.levels, row.price) ? 1 : 0;
    data.rows.push_back(std::move(row));
  }
  return {std::move(data), std::move(truth)};
}

CounterfactualMatrix TruthCounterfactuals(const GroundTruth& truth, const ObservationSet& data) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(data.rows.size()),
                    static_cast<Eigen::Index>(data.price_grid.size()));
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    for (std::size_t k = 0; k < data.price_grid.size(); ++k) {
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          truth.Probability(data.rows[i].levels, data.price_grid[k]);
    }
  }
  return CounterfactualsFromProbabilities(std::move(f), data.price_grid);
}

CellOracle OracleCellOptimum(const GroundTruth& truth, const ObservationSet& data,
                             const std::vector<std::size_t>& policy_features) {
  const CounterfactualMatrix cf = TruthCounterfactuals(truth, data);
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    std::vector<std::size_t> key;
    for (auto f : policy_features) key.push_back(data.rows[i].levels[f]);
    cells[key].push_back(i);
  }
  CellOracle oracle;
  oracle.assignment.assign(data.rows.size(), 0);
  double total = 0.0;
  for (const auto& [key, members] : cells) {
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < data.price_grid.size(); ++k) {
      double revenue = 0.0;
      for (auto i : members) revenue += cf.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      if (revenue > best) {
        best = revenue;
        best_k = k;
      }
    }
    total += best;
    for (auto i : members) oracle.assignment[i] = best_k;
  }
  oracle.revenue_per_request = data.rows.empty() ? 0.0 : total / static_cast<double>(data.rows.size());
  return oracle;
}

}  // namespace rxprice
