#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rxprice/demand_model.hpp"
#include "rxprice/feature_graph.hpp"

namespace rxprice {

// A multiway-split pricing tree: at most `m` rules with pairwise
// disjoint coverage, plus the samples left to slack.
struct PricingPolicy {
  Market market;
  std::vector<FeatureGraph::Layer> layers;
  std::vector<double> price_grid;
  std::vector<Rule> rules;
  std::vector<std::size_t> uncovered;
  double objective = 0.0;
  std::size_t m = 1;
  std::optional<PriceBounds> bounds;
  bool proven_optimal = true;
  bool heuristic_pricing = false;

  double RulePrice(const Rule& rule) const { return price_grid.at(rule.price_index); }
};

// c_i = 2 * max_k g[i][k].
std::vector<double> DefaultSlackPenalty(const CounterfactualMatrix& cf);

// Per-sample price index implied by the policy; uncovered samples get
// `fallback_price_index`.
std::vector<std::size_t> PolicyAssignment(const PricingPolicy& policy, std::size_t samples,
                                          std::size_t fallback_price_index);

// sum of rule outcomes minus slack penalties of uncovered samples.
double PolicyObjective(const std::vector<Rule>& rules, std::span<const double> slack_penalty);

// Throws Error(kInvalidArgument) if coverage overlaps, the partition with
// `uncovered` is incomplete, or there are more than m rules.
void CheckPolicyInvariants(const PricingPolicy& policy, std::size_t samples);

// Exhaustive search over subsets of at most m pairwise-disjoint rules. Rules
// sharing a coverage set are reduced to the best one first. Throws
// Error(kTooLarge) when more than `max_subsets` subsets would be examined.
PricingPolicy SolveBruteForce(const FeatureGraph& graph, const std::vector<Rule>& rules,
                              std::span<const double> slack_penalty, std::size_t m,
                              std::size_t max_subsets = 2'000'000);

struct ColumnGenerationLimits {
  std::size_t path_budget = 100'000;
  std::size_t beam_width = 200;
  std::size_t max_nodes = 10'000;
  std::size_t max_columns_per_round = 64;
  double reduced_cost_tol = 1e-7;
  std::chrono::milliseconds time_budget{30'000};
};

struct ColumnGenerationStats {
  std::size_t nodes = 0;
  std::size_t lp_solves = 0;
  std::size_t columns = 0;
  double root_bound = 0.0;
  // Samples with equal levels on every layer share one master row.
  std::vector<std::size_t> sample_class;
  Eigen::VectorXd root_duals;  // per coverage class, then cardinality row
};

// Branch-and-price on the set-partitioning master. The LP relaxation of the
// restricted master is solved by the in-repo simplex; columns enter while a
// path with positive reduced cost exists. Hitting the node cap or the time
// budget returns the best incumbent with proven_optimal = false.
PricingPolicy SolveColumnGeneration(const FeatureGraph& graph, const LayerLevels& levels,
                                    const CounterfactualMatrix& cf, std::size_t m,
                                    std::span<const double> slack_penalty,
                                    const ColumnGenerationLimits& limits = {},
                                    ColumnGenerationStats* stats = nullptr);

// The historical policy: one all-SKIP rule at `price_index`.
PricingPolicy BasePolicy(const FeatureGraph& graph, const CounterfactualMatrix& cf,
                         std::size_t price_index, std::span<const double> slack_penalty);

struct ClampResult {
  PricingPolicy policy;
  KpiReport kpis;
};

// Re-prices every rule to the nearest grid price inside `bounds` without
// re-optimising; KPIs are measured against `base_assignment`.
ClampResult ClampPolicy(const PricingPolicy& policy, const PriceBounds& bounds,
                        const CounterfactualMatrix& cf,
                        std::span<const std::size_t> base_assignment,
                        std::span<const double> slack_penalty,
                        std::size_t fallback_price_index);

}  // namespace rxprice
