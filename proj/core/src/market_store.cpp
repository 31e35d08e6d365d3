#include "rxprice/market_store.hpp"

#include <mutex>

#include "rxprice/datagen.hpp"
#include "rxprice/error.hpp"

namespace rxprice {
namespace {

std::vector<std::size_t> GridFeatures(const ObservationSet& data) {
  std::vector<std::size_t> out;
  for (const char* name : {kAdvancePurchase, kStayRestriction, kFareDiscount}) {
    if (auto k = data.FeatureIndex(name)) out.push_back(*k);
  }
  return out;
}

void DeriveFromFit(MarketEntry& entry) {
  entry.cf = Counterfactuals(entry.demand, entry.observations);
  entry.slack_penalty = DefaultSlackPenalty(entry.cf);
  entry.policy_features = GridFeatures(entry.observations);
  entry.base_price_index = ModalPriceIndex(entry.observations);
  entry.base_assignment.assign(entry.observations.size(), entry.base_price_index);
  entry.base_policy = BasePolicy(PolicyGraph(entry), entry.cf, entry.base_price_index, entry.slack_penalty);
  entry.base_policy.market = entry.observations.market;
}

}  // namespace

MarketEntry BuildMarketEntry(ObservationSet observations, const IngestOptions& options) {
  observations.Validate();
  MarketEntry entry;
  entry.observations = std::move(observations);

  const SelectionDesign design = EncodeForSelection(entry.observations);
  const ActionPartitionedData standardized = Standardize(design.data);
  PenaltyConfig pen;
  pen.kind = options.penalty;
  pen.gamma = options.gamma;
  pen.lambda = DefaultLambda(standardized.covariates(), standardized.actions(), standardized.samples(),
                            options.lambda_scale);
  entry.selection = FitGroupSparse(standardized, pen);
  entry.selected_features = FeatureSupport(entry.selection.support, design.column_feature);
  entry.demand = FitDemand(entry.observations, entry.selected_features, options.demand);
  DeriveFromFit(entry);
  return entry;
}

MarketEntry RestoreMarketEntry(ObservationSet observations, SelectionResult selection,
                               DemandFit demand) {
  observations.Validate();
  MarketEntry entry;
  entry.observations = std::move(observations);
  entry.selection = std::move(selection);
  entry.selected_features = demand.selected_features;
  entry.demand = std::move(demand);
  DeriveFromFit(entry);
  return entry;
}

FeatureGraph PolicyGraph(const MarketEntry& entry, const std::optional<PriceBounds>& bounds) {
  return BuildGraph(entry.observations.schema, entry.policy_features,
                    entry.observations.price_grid, bounds);
}

KpiReport BaseKpis(const MarketEntry& entry) {
  return EvaluatePolicy(entry.cf, entry.base_assignment, entry.base_assignment);
}

KpiReport PolicyKpis(const MarketEntry& entry, const PricingPolicy& policy) {
  const auto assignment = PolicyAssignment(policy, entry.observations.size(), entry.base_price_index);
  return EvaluatePolicy(entry.cf, assignment, entry.base_assignment);
}

OptimizeResult OptimizePolicy(const MarketEntry& entry, const OptimizeRequest& request) {
  if (request.m == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one rule");
  const FeatureGraph graph = PolicyGraph(entry, request.bounds);
  const LayerLevels levels = ExtractLayerLevels(graph, entry.observations);
  OptimizeResult result;
  result.policy = SolveColumnGeneration(graph, levels, entry.cf, request.m, entry.slack_penalty,
                                        request.limits);
  result.policy.market = entry.observations.market;
  result.kpis = PolicyKpis(entry, result.policy);
  return result;
}

std::shared_ptr<const MarketEntry> MarketStore::Find(const Market& market) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(market);
  return it == entries_.end() ? nullptr : it->second;
}

std::shared_ptr<const MarketEntry> MarketStore::Get(const Market& market) const {
  auto entry = Find(market);
  if (!entry) throw Error(ErrorCode::kUnknownMarket, "no such market: " + market.Key());
  return entry;
}

void MarketStore::Put(std::shared_ptr<const MarketEntry> entry) {
  std::unique_lock lock(mutex_);
  entries_[entry->observations.market] = std::move(entry);
}

std::vector<Market> MarketStore::Markets() const {
  std::shared_lock lock(mutex_);
  std::vector<Market> out;
  for (const auto& [market, entry] : entries_) out.push_back(market);
  return out;
}

}  // namespace rxprice
