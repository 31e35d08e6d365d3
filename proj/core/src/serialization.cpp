#include "rxprice/serialization.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <cstdio>

#include "rxprice/error.hpp"

namespace rxprice {
namespace {

double Round(double value, double scale) { return std::round(value * scale) / scale; }

Json Unknown() { return "Unknown"; }

template <typename T>
Json OrUnknown(const std::optional<T>& value) {
  return value ? Json(*value) : Unknown();
}

std::string PairText(const std::optional<std::string>& a, const std::optional<std::string>& b) {
  return a.value_or("Unknown") + "-" + b.value_or("Unknown");
}

std::string PriceText(const std::optional<double>& v) {
  if (!v) return "Unknown";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", *v);
  return buf;
}

std::optional<double> PriceFrom(const std::string& text) {
  if (text == "Unknown") return std::nullopt;
  return std::stod(text);
}

}  // namespace

std::string FormatPercent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", Round(fraction * 100.0, 10.0));
  return buf;
}

std::string FormatMoney(double amount) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "$%.2f", amount);
  return buf;
}

Json SelectionToJson(const SelectionResult& result) {
  Json theta = Json::array();
  for (Eigen::Index i = 0; i < result.theta.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < result.theta.cols(); ++j) row.push_back(result.theta(i, j));
    theta.push_back(std::move(row));
  }
  return {{"theta", theta},
          {"support", result.support},
          {"converged", result.converged},
          {"iterations", result.iterations}};
}

SelectionResult SelectionFromJson(const Json& json) {
  SelectionResult result;
  const auto& theta = json.at("theta");
  const auto rows = static_cast<Eigen::Index>(theta.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(theta.at(0).size()) : 0;
  result.theta.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      result.theta(i, j) = theta.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
    }
  }
  result.row_norms = result.theta.rowwise().norm();
  result.support = json.at("support").get<std::vector<std::size_t>>();
  result.converged = json.at("converged").get<bool>();
  result.iterations = json.at("iterations").get<std::size_t>();
  return result;
}

Json KpiToJson(const KpiReport& kpis) {
  return {{"revenue_per_request", Round(kpis.revenue_per_request, 100.0)},
          {"conversion_rate", Round(kpis.conversion_rate * 100.0, 10.0)},
          {"uplift_pct", kpis.uplift ? Json(Round(*kpis.uplift * 100.0, 10.0)) : Json(nullptr)},
          {"requests", kpis.requests},
          {"expected_bookings", Round(kpis.expected_bookings, 10.0)}};
}

Json PolicyToJson(const PricingPolicy& policy, bool with_coverage) {
  Json rules = Json::array();
  for (const auto& rule : policy.rules) {
    Json conditions = Json::object();
    for (std::size_t l = 0; l < rule.conditions.size(); ++l) {
      if (rule.conditions[l] == kSkip) continue;
      conditions[policy.layers[l].name] = policy.layers[l].levels.at(rule.conditions[l]);
    }
    Json entry = {{"conditions", conditions},
                  {"price", policy.RulePrice(rule)},
                  {"covered_count", rule.covered.size()},
                  {"expected_revenue", rule.outcome}};
    if (with_coverage) entry["covered"] = rule.covered;
    rules.push_back(std::move(entry));
  }
  Json bounds = nullptr;
  if (policy.bounds) bounds = {{"min", OrUnknown(policy.bounds->min)}, {"max", OrUnknown(policy.bounds->max)}};
  Json out = {{"market", policy.market.Key()},
              {"rules", rules},
              {"objective", policy.objective},
              {"m", policy.m},
              {"bounds", bounds},
              {"uncovered_count", policy.uncovered.size()},
              {"proven_optimal", policy.proven_optimal}};
  if (with_coverage) {
    Json layers = Json::array();
    for (const auto& layer : policy.layers) {
      layers.push_back({{"feature", layer.feature}, {"name", layer.name}, {"levels", layer.levels}});
    }
    out["layers"] = layers;
    out["price_grid"] = policy.price_grid;
    out["uncovered"] = policy.uncovered;
    out["origin"] = policy.market.origin;
    out["destination"] = policy.market.destination;
    out["heuristic_pricing"] = policy.heuristic_pricing;
  }
  return out;
}

PricingPolicy PolicyFromJson(const Json& json) {
  if (!json.contains("layers") || !json.contains("uncovered")) {
    throw Error(ErrorCode::kInvalidArgument, "policy JSON lacks coverage detail");
  }
  PricingPolicy policy;
  policy.market = {json.at("origin").get<std::string>(), json.at("destination").get<std::string>()};
  for (const auto& layer : json.at("layers")) {
    policy.layers.push_back({layer.at("feature").get<std::size_t>(), layer.at("name").get<std::string>(),
                             layer.at("levels").get<std::vector<std::string>>()});
  }
  policy.price_grid = json.at("price_grid").get<std::vector<double>>();
  for (const auto& entry : json.at("rules")) {
    Rule rule;
    rule.conditions.assign(policy.layers.size(), kSkip);
    for (const auto& [name, level] : entry.at("conditions").items()) {
      for (std::size_t l = 0; l < policy.layers.size(); ++l) {
        if (policy.layers[l].name != name) continue;
        const auto& levels = policy.layers[l].levels;
        const auto it = std::find(levels.begin(), levels.end(), level.get<std::string>());
        if (it == levels.end()) throw Error(ErrorCode::kInvalidArgument, "unknown level in policy JSON");
        rule.conditions[l] = static_cast<std::size_t>(it - levels.begin());
      }
    }
    const double price = entry.at("price").get<double>();
    const auto it = std::find(policy.price_grid.begin(), policy.price_grid.end(), price);
    if (it == policy.price_grid.end()) throw Error(ErrorCode::kInvalidArgument, "rule price not on grid");
    rule.price_index = static_cast<std::size_t>(it - policy.price_grid.begin());
    rule.covered = entry.at("covered").get<std::vector<std::size_t>>();
    rule.outcome = entry.at("expected_revenue").get<double>();
    policy.rules.push_back(std::move(rule));
  }
  policy.uncovered = json.at("uncovered").get<std::vector<std::size_t>>();
  policy.objective = json.at("objective").get<double>();
  policy.m = json.at("m").get<std::size_t>();
  if (!json.at("bounds").is_null()) {
    PriceBounds bounds;
    const auto& b = json.at("bounds");
    if (!b.at("min").is_string()) bounds.min = b.at("min").get<double>();
    if (!b.at("max").is_string()) bounds.max = b.at("max").get<double>();
    policy.bounds = bounds;
  }
  policy.proven_optimal = json.at("proven_optimal").get<bool>();
  policy.heuristic_pricing = json.value("heuristic_pricing", false);
  return policy;
}

Json MemoryToJson(const AgentMemory& memory) {
  const auto& s = memory.slots;
  const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                         memory.updated_at.time_since_epoch())
                         .count();
  return {{"function_call", std::string(IntentName(memory.function_call))},
          {"origin-destination", PairText(s.origin, s.destination)},
          {"price_bound", PriceText(s.min_price) + "-" + PriceText(s.max_price)},
          {"cardinality", OrUnknown(s.cardinality)},
          {"updated_at_ms", stamp}};
}

AgentMemory MemoryFromJson(const Json& json) {
  AgentMemory memory;
  memory.function_call = ParseIntent(json.at("function_call").get<std::string>()).value_or(Intent::kUnknown);
  auto split = [](const std::string& text) {
    const auto dash = text.find('-');
    return std::pair{text.substr(0, dash), dash == std::string::npos ? std::string("Unknown") : text.substr(dash + 1)};
  };
  auto [origin, destination] = split(json.at("origin-destination").get<std::string>());
  if (origin != "Unknown") memory.slots.origin = origin;
  if (destination != "Unknown") memory.slots.destination = destination;
  auto [lo, hi] = split(json.at("price_bound").get<std::string>());
  memory.slots.min_price = PriceFrom(lo);
  memory.slots.max_price = PriceFrom(hi);
  if (!json.at("cardinality").is_string()) memory.slots.cardinality = json.at("cardinality").get<std::size_t>();
  memory.updated_at = std::chrono::system_clock::time_point(
      std::chrono::milliseconds(json.value("updated_at_ms", std::int64_t{0})));
  return memory;
}

Json DemandFitToJson(const DemandFit& fit) {
  return {{"selected_features", fit.selected_features},
          {"level_weights", fit.level_weights},
          {"intercept", fit.intercept},
          {"price_coef", fit.price_coef},
          {"train_log_loss", fit.train_log_loss},
          {"gradient_norm", fit.gradient_norm},
          {"iterations", fit.iterations},
          {"degenerate", fit.degenerate}};
}

DemandFit DemandFitFromJson(const Json& json) {
  DemandFit fit;
  fit.selected_features = json.at("selected_features").get<std::vector<std::size_t>>();
  fit.level_weights = json.at("level_weights").get<std::vector<std::vector<double>>>();
  fit.intercept = json.at("intercept").get<double>();
  fit.price_coef = json.at("price_coef").get<double>();
  fit.train_log_loss = json.at("train_log_loss").get<double>();
  fit.gradient_norm = json.at("gradient_norm").get<double>();
  fit.iterations = json.at("iterations").get<std::size_t>();
  fit.degenerate = json.at("degenerate").get<bool>();
  return fit;
}

Json GroundTruthToJson(const GroundTruth& truth) {
  return {{"confounders", truth.confounders},
          {"predictors", truth.predictors},
          {"treatment_only", truth.treatment_only},
          {"true_support", truth.true_support},
          {"intercept", truth.intercept},
          {"effects", truth.effects},
          {"price_slope", truth.price_slope},
          {"propensity_weights", truth.propensity_weights},
          {"confounding", truth.confounding},
          {"seed", truth.seed}};
}

Json ObservationsToJson(const ObservationSet& data) {
  Json schema = Json::array();
  for (const auto& f : data.schema) schema.push_back({{"name", f.name}, {"levels", f.levels}});
  Json rows = Json::array();
  for (const auto& r : data.rows) {
    Json row(r.levels);
    row.push_back(r.price);
    row.push_back(r.purchased);
    rows.push_back(std::move(row));
  }
  return {{"origin", data.market.origin},
          {"destination", data.market.destination},
          {"schema", schema},
          {"price_grid", data.price_grid},
          {"rows", rows}};
}

ObservationSet ObservationsFromJson(const Json& json) {
  ObservationSet data;
  data.market = {json.at("origin").get<std::string>(), json.at("destination").get<std::string>()};
  for (const auto& f : json.at("schema")) {
    data.schema.push_back({f.at("name").get<std::string>(), f.at("levels").get<std::vector<std::string>>()});
  }
  data.price_grid = json.at("price_grid").get<std::vector<double>>();
  const std::size_t p = data.schema.size();
  for (const auto& row : json.at("rows")) {
    if (row.size() != p + 2) throw Error(ErrorCode::kInvalidArgument, "observation row has wrong width");
    Observation obs;
    for (std::size_t k = 0; k < p; ++k) obs.levels.push_back(row[k].get<std::size_t>());
    obs.price = row[p].get<double>();
    obs.purchased = row[p + 1].get<int>();
    data.rows.push_back(std::move(obs));
  }
  data.Validate();
  return data;
}

}  // namespace rxprice
