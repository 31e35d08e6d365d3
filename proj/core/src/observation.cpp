#include "rxprice/observation.hpp"

#include <algorithm>

#include "rxprice/error.hpp"

namespace rxprice {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyBlock: return "EmptyBlock";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyPriceRange: return "EmptyPriceRange";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kBadPartition: return "BadPartition";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownMarket: return "UnknownMarket";
    case ErrorCode::kMalformedCompletion: return "MalformedCompletion";
    case ErrorCode::kClientTimeout: return "ClientTimeout";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

std::optional<std::size_t> ObservationSet::FeatureIndex(const std::string& name) const {
  for (std::size_t k = 0; k < schema.size(); ++k) {
    if (schema[k].name == name) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> ObservationSet::PriceIndex(double price) const {
  auto it = std::lower_bound(price_grid.begin(), price_grid.end(), price);
  if (it == price_grid.end() || *it != price) return std::nullopt;
  return static_cast<std::size_t>(it - price_grid.begin());
}

void ObservationSet::Validate() const {
  if (price_grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "price grid is empty");
  }
  for (std::size_t k = 1; k < price_grid.size(); ++k) {
    if (!(price_grid[k] > price_grid[k - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "price grid must be strictly increasing");
    }
  }
  for (const auto& row : rows) {
    if (row.levels.size() != schema.size()) {
      throw Error(ErrorCode::kInvalidArgument, "row does not match the feature schema");
    }
    for (std::size_t k = 0; k < schema.size(); ++k) {
      if (row.levels[k] >= schema[k].levels.size()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "level out of range for feature " + schema[k].name);
      }
    }
    if (!(row.price > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "prices must be positive");
    }
    if (row.purchased != 0 && row.purchased != 1) {
      throw Error(ErrorCode::kInvalidArgument, "purchased must be 0 or 1");
    }
  }
}

std::size_t ModalPriceIndex(const ObservationSet& data) {
  std::vector<std::size_t> counts(data.price_grid.size(), 0);
  for (const auto& row : data.rows) {
    if (auto k = data.PriceIndex(row.price)) ++counts[*k];
  }
  return static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace rxprice
