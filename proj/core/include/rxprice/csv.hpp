#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "rxprice/observation.hpp"

namespace rxprice {

// Required leading columns, in order. Further columns are read as extra
// categorical covariates.
inline constexpr std::array<std::string_view, 7> kCsvHeader{
    "origin", "destination", "advance_purchase_days", "stay_restriction",
    "fare_discount_level", "price", "purchased"};

inline constexpr std::size_t kMinRowsPerMarket = 30;

// Bucket label for an advance-purchase day count: 0-6, 7-20 or 21+.
std::string_view AdvancePurchaseBucket(long days);

// Parses booking records and splits them by market. The three grid features
// always carry their canonical levels; unseen values are appended. Throws
// Error(kSchemaMismatch) naming missing or misplaced columns and
// Error(kTooFewRows) when a market has fewer than kMinRowsPerMarket rows.
std::vector<ObservationSet> ReadBookingCsv(std::istream& in);
std::vector<ObservationSet> ReadBookingCsv(const std::filesystem::path& path);

// Writes the same format. Expects the grid features at schema positions
// 0..2; the remaining features become extra columns.
void WriteBookingCsv(std::ostream& out, const ObservationSet& data);
void WriteBookingCsv(const std::filesystem::path& path, const ObservationSet& data);

}  // namespace rxprice
