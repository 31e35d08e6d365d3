#pragma once

#include <string>

#include <json.hpp>

#include "rxprice/agent.hpp"
#include "rxprice/causal_select.hpp"
#include "rxprice/datagen.hpp"
#include "rxprice/demand_model.hpp"
#include "rxprice/policy_opt.hpp"

namespace rxprice {

using Json = nlohmann::json;

// {theta: [[..]], support: [..], converged, iterations}
Json SelectionToJson(const SelectionResult& result);
SelectionResult SelectionFromJson(const Json& json);

// {revenue_per_request, conversion_rate, uplift_pct, requests,
// expected_bookings}. Rates are percentages rounded to one decimal, revenue
// to cents.
Json KpiToJson(const KpiReport& kpis);

// Display contract shared with the web UI:
// {market, rules: [{conditions: {feature: level}, price, covered_count,
// expected_revenue}], objective, m, bounds}. `with_coverage` adds the exact
// sample indices and graph layout needed to reload the policy.
Json PolicyToJson(const PricingPolicy& policy, bool with_coverage = false);
PricingPolicy PolicyFromJson(const Json& json);

// Memory snapshot in the slot grammar's vocabulary; Unknown is literal.
Json MemoryToJson(const AgentMemory& memory);
AgentMemory MemoryFromJson(const Json& json);

Json DemandFitToJson(const DemandFit& fit);
DemandFit DemandFitFromJson(const Json& json);

Json GroundTruthToJson(const GroundTruth& truth);

// Compact form: rows are [level..., price, purchased].
Json ObservationsToJson(const ObservationSet& data);
ObservationSet ObservationsFromJson(const Json& json);

std::string FormatPercent(double fraction);  // 0.0612 -> "6.1%"
std::string FormatMoney(double amount);      // 26.5 -> "$26.50"

}  // namespace rxprice
