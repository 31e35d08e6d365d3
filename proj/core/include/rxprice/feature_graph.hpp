#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "rxprice/demand_model.hpp"
#include "rxprice/observation.hpp"

namespace rxprice {

using SampleSet = boost::dynamic_bitset<>;

// Condition value meaning "any level" for a feature layer.
inline constexpr std::size_t kSkip = std::numeric_limits<std::size_t>::max();

// Closed price interval; an empty end is unbounded.
struct PriceBounds {
  std::optional<double> min;
  std::optional<double> max;

  bool Contains(double price) const {
    return (!min || price >= *min) && (!max || price <= *max);
  }
  friend bool operator==(const PriceBounds&, const PriceBounds&) = default;
};

// Layered DAG: source -> one layer per policy feature (its levels plus SKIP)
// -> action layer (one node per allowed price, no SKIP) -> sink.
struct FeatureGraph {
  struct Layer {
    std::size_t feature = 0;  // schema index
    std::string name;
    std::vector<std::string> levels;

    std::size_t width() const { return levels.size() + 1; }  // + SKIP
  };

  std::vector<Layer> layers;
  std::vector<double> price_grid;           // full grid
  std::vector<std::size_t> action_prices;   // allowed grid indices
  std::optional<PriceBounds> bounds;

  // Number of source-to-sink paths; saturates at SIZE_MAX.
  std::size_t PathCount() const;
};

FeatureGraph BuildGraph(const FeatureSchema& schema,
                        const std::vector<std::size_t>& policy_features,
                        const std::vector<double>& price_grid,
                        const std::optional<PriceBounds>& bounds = std::nullopt);

// A decision rule: a source-to-sink path. conditions[l] is a level index of
// layer l or kSkip.
struct Rule {
  std::vector<std::size_t> conditions;
  std::size_t price_index = 0;
  std::vector<std::size_t> covered;  // ascending sample indices
  double outcome = 0.0;              // sum of g over covered samples at the price

  friend bool operator==(const Rule&, const Rule&) = default;
};

// Level of each sample on each graph layer; samples x layers.
using LayerLevels = std::vector<std::vector<std::size_t>>;

LayerLevels ExtractLayerLevels(const FeatureGraph& graph, const ObservationSet& data);

// Per (layer, level) bitsets of the samples carrying that level.
std::vector<std::vector<SampleSet>> LevelBitsets(const FeatureGraph& graph,
                                                 const LayerLevels& levels);

// Materialises every path. Throws Error(kBudgetExceeded) carrying the exact
// count when it exceeds `path_budget`.
std::vector<Rule> EnumerateRules(const FeatureGraph& graph, const LayerLevels& levels,
                                 const CounterfactualMatrix& cf, std::size_t path_budget);

// Lexicographic order on conditions where a concrete level sorts before SKIP.
bool ConditionsLess(const std::vector<std::size_t>& lhs,
                    const std::vector<std::size_t>& rhs);

}  // namespace rxprice
