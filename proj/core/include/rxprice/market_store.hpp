#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "rxprice/causal_select.hpp"
#include "rxprice/demand_model.hpp"
#include "rxprice/policy_opt.hpp"

namespace rxprice {

struct IngestOptions {
  PenaltyKind penalty = PenaltyKind::kMcp;
  double lambda_scale = 0.2;  // see DefaultLambda
  double gamma = 3.0;
  DemandOptions demand;
};

// Everything derived from one market's history at ingest time.
struct MarketEntry {
  ObservationSet observations;
  SelectionResult selection;
  std::vector<std::size_t> selected_features;  // schema indices
  DemandFit demand;
  CounterfactualMatrix cf;
  std::vector<double> slack_penalty;
  std::vector<std::size_t> policy_features;  // the pricing grid dimensions
  std::size_t base_price_index = 0;
  std::vector<std::size_t> base_assignment;
  PricingPolicy base_policy;
};

// Feature selection, demand fit and the historical base policy for one
// market.
MarketEntry BuildMarketEntry(ObservationSet observations, const IngestOptions& options = {});

// Rebuilds the derived state of an entry from a stored selection and fit
// without refitting.
MarketEntry RestoreMarketEntry(ObservationSet observations, SelectionResult selection,
                               DemandFit demand);

// Policy graph over the entry's pricing grid features.
FeatureGraph PolicyGraph(const MarketEntry& entry, const std::optional<PriceBounds>& bounds = std::nullopt);

struct OptimizeRequest {
  std::size_t m = 1;
  std::optional<PriceBounds> bounds;
  ColumnGenerationLimits limits;
};

struct OptimizeResult {
  PricingPolicy policy;
  KpiReport kpis;  // uplift against the base policy
};

OptimizeResult OptimizePolicy(const MarketEntry& entry, const OptimizeRequest& request);

// Base policy KPIs (uplift exactly 0).
KpiReport BaseKpis(const MarketEntry& entry);

KpiReport PolicyKpis(const MarketEntry& entry, const PricingPolicy& policy);

// Concurrent reads, exclusive writes. Entries are immutable once stored.
class MarketStore {
 public:
  std::shared_ptr<const MarketEntry> Find(const Market& market) const;
  // Throws Error(kUnknownMarket).
  std::shared_ptr<const MarketEntry> Get(const Market& market) const;
  void Put(std::shared_ptr<const MarketEntry> entry);
  std::vector<Market> Markets() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<Market, std::shared_ptr<const MarketEntry>> entries_;
};

}  // namespace rxprice
