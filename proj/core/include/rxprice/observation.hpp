#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rxprice {

// An origin/destination airport pair identifying one market.
struct Market {
  std::string origin;
  std::string destination;

  std::string Key() const { return origin + "-" + destination; }
  friend bool operator==(const Market&, const Market&) = default;
  friend auto operator<=>(const Market&, const Market&) = default;
};

struct Feature {
  std::string name;
  std::vector<std::string> levels;
};

using FeatureSchema = std::vector<Feature>;

// One booking request. `levels[k]` indexes into schema[k].levels.
struct Observation {
  std::vector<std::size_t> levels;
  double price = 0.0;
  int purchased = 0;
};

// Historical samples for a single market.
struct ObservationSet {
  Market market;
  FeatureSchema schema;
  std::vector<Observation> rows;
  std::vector<double> price_grid;  // strictly increasing

  std::size_t size() const { return rows.size(); }

  std::optional<std::size_t> FeatureIndex(const std::string& name) const;
  std::optional<std::size_t> PriceIndex(double price) const;

  // Throws Error(kInvalidArgument) when a row references an unknown level,
  // a price is not positive, or the grid is not strictly increasing.
  void Validate() const;
};

// Index of the grid price that occurs most often in `rows`; ties resolve to
// the lower price.
std::size_t ModalPriceIndex(const ObservationSet& data);

}  // namespace rxprice
