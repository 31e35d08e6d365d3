#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rxprice/demand_model.hpp"
#include "rxprice/observation.hpp"

namespace rxprice {

// Scale parameters are our own choices; the generator only has to exhibit
// the causal structure (treatment-only parents, confounders, predictors,
// noise) with a known downward-sloping demand curve.
struct DatagenConfig {
  Market market{"DTW", "JFK"};
  std::size_t covariates = 20;  // p, at least the three grid features
  std::size_t samples = 2000;   // n
  std::size_t treatment_only = 2;
  std::size_t confounders = 3;
  std::size_t predictors = 2;
  std::vector<double> price_grid{395, 445, 475, 510, 550, 595, 635};
  std::uint64_t seed = 1;

  double effect_min = 0.8;   // |outcome effect| per standardized unit
  double effect_max = 1.2;
  double propensity_min = 0.5;
  double propensity_max = 1.0;
  double confounding = 1.5;  // softmax slope of price propensity
  double price_slope = -0.004;
  double reference_price = 510.0;  // logit is centered here
};

struct GroundTruth {
  std::vector<std::size_t> confounders;      // X2
  std::vector<std::size_t> predictors;       // X3
  std::vector<std::size_t> treatment_only;   // X1
  std::vector<std::size_t> true_support;     // X2 u X3, ascending
  double intercept = 0.0;
  std::vector<double> effects;               // per feature; zero outside the support
  double price_slope = 0.0;
  std::vector<double> propensity_weights;    // per feature; zero outside X1 u X2
  double confounding = 0.0;
  std::vector<std::vector<double>> level_values;  // standardized level encodings
  std::uint64_t seed = 0;

  double Logit(const std::vector<std::size_t>& levels, double price) const;
  double Probability(const std::vector<std::size_t>& levels, double price) const;
};

// Names of the three pricing-grid features, which are always schema
// positions 0..2.
inline constexpr const char* kAdvancePurchase = "advance_purchase";
inline constexpr const char* kStayRestriction = "stay_restriction";
inline constexpr const char* kFareDiscount = "fare_discount_level";

FeatureSchema GridSchema();

// Deterministic per seed. Throws Error(kBadPartition) if the partition does
// not fit in p or p < 3.
std::pair<ObservationSet, GroundTruth> Generate(const DatagenConfig& config);

// Purchase probabilities under the true demand curve.
CounterfactualMatrix TruthCounterfactuals(const GroundTruth& truth, const ObservationSet& data);

struct CellOracle {
  double revenue_per_request = 0.0;
  std::vector<std::size_t> assignment;  // per-sample best price of its cell
};

// Best grid price per cell of `policy_features` under the true demand curve,
// found by direct evaluation of every price.
CellOracle OracleCellOptimum(const GroundTruth& truth, const ObservationSet& data,
                             const std::vector<std::size_t>& policy_features);

}  // namespace rxprice
