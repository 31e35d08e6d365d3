#include "rxprice/feature_graph.hpp"

#include <algorithm>
#include <string>

#include "rxprice/error.hpp"

namespace rxprice {

std::size_t FeatureGraph::PathCount() const {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t count = action_prices.size();
  for (const auto& layer : layers) {
    if (count != 0 && layer.width() > kMax / count) return kMax;
    count *= layer.width();
  }
  return count;
}

FeatureGraph BuildGraph(const FeatureSchema& schema,
                        const std::vector<std::size_t>& policy_features,
                        const std::vector<double>& price_grid,
                        const std::optional<PriceBounds>& bounds) {
  if (price_grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "price grid is empty");
  }
  FeatureGraph graph;
  for (auto f : policy_features) {
    if (f >= schema.size()) {
      throw Error(ErrorCode::kInvalidArgument, "policy feature outside the schema");
    }
    graph.layers.push_back({f, schema[f].name, schema[f].levels});
  }
  graph.price_grid = price_grid;
  graph.bounds = bounds;
  for (std::size_t k = 0; k < price_grid.size(); ++k) {
    if (!bounds || bounds->Contains(price_grid[k])) graph.action_prices.push_back(k);
  }
  if (graph.action_prices.empty()) {
    throw Error(ErrorCode::kEmptyPriceRange, "price bounds exclude every candidate price");
  }
  return graph;
}

LayerLevels ExtractLayerLevels(const FeatureGraph& graph, const ObservationSet& data) {
  LayerLevels out(data.rows.size(), std::vector<std::size_t>(graph.layers.size()));
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    for (std::size_t l = 0; l < graph.layers.size(); ++l) {
      out[i][l] = data.rows[i].levels.at(graph.layers[l].feature);
    }
  }
  return out;
}

std::vector<std::vector<SampleSet>> LevelBitsets(const FeatureGraph& graph,
                                                 const LayerLevels& levels) {
  std::vector<std::vector<SampleSet>> sets(graph.layers.size());
  for (std::size_t l = 0; l < graph.layers.size(); ++l) {
    sets[l].assign(graph.layers[l].levels.size(), SampleSet(levels.size()));
    for (std::size_t i = 0; i < levels.size(); ++i) sets[l][levels[i][l]].set(i);
  }
  return sets;
}

std::vector<Rule> EnumerateRules(const FeatureGraph& graph, const LayerLevels& levels,
                                 const CounterfactualMatrix& cf, std::size_t path_budget) {
  const std::size_t total = graph.PathCount();
  if (total > path_budget) {
    throw Error(ErrorCode::kBudgetExceeded,
                "feature graph has " + std::to_string(total) +
                    " paths, above the budget of " + std::to_string(path_budget));
  }
  if (cf.samples() != levels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "counterfactuals do not match the samples");
  }
  const auto bitsets = LevelBitsets(graph, levels);
  std::vector<Rule> rules;
  rules.reserve(total);

  std::vector<std::size_t> conditions(graph.layers.size(), kSkip);
  SampleSet all(levels.size());
  all.set();

  // Depth-first over layers carrying the still-matching samples.
  auto visit = [&](auto&& self, std::size_t layer, const SampleSet& matching) -> void {
    if (layer == graph.layers.size()) {
      std::vector<std::size_t> covered;
      covered.reserve(matching.count());
      for (auto i = matching.find_first(); i != SampleSet::npos; i = matching.find_next(i)) {
        covered.push_back(i);
      }
      for (auto k : graph.action_prices) {
        Rule rule{conditions, k, covered, 0.0};
        for (auto i : covered) {
          rule.outcome += cf.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
        rules.push_back(std::move(rule));
      }
      return;
    }
    for (std::size_t level = 0; level < graph.layers[layer].levels.size(); ++level) {
      conditions[layer] = level;
      self(self, layer + 1, matching & bitsets[layer][level]);
    }
    conditions[layer] = kSkip;
    self(self, layer + 1, matching);
  };
  visit(visit, 0, all);
  return rules;
}

bool ConditionsLess(const std::vector<std::size_t>& lhs,
                    const std::vector<std::size_t>& rhs) {
  return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(), rhs.end());
}

}  // namespace rxprice
