#include "rxprice/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "rxprice/datagen.hpp"
#include "rxprice/error.hpp"

namespace rxprice {
namespace {

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string Trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T ParseNumber(const std::string& text, std::size_t line, std::string_view column) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line) + ": bad " +
                                                 std::string(column) + " '" + text + "'");
  }
  return value;
}

struct RawRow {
  Market market;
  std::vector<std::string> values;  // per feature
  double price = 0.0;
  int purchased = 0;
};

// Day counts written for an advance-purchase bucket; spread deterministically
// over the bucket so the file looks like raw data.
long DaysFor(std::size_t level, std::size_t row) {
  switch (level) {
    case 0: return static_cast<long>(row % 7);
    case 1: return 7 + static_cast<long>(row % 14);
    default: return 21 + static_cast<long>(row % 40);
  }
}

std::string FormatPrice(double price) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", price);
  return buf;
}

}  // namespace

std::string_view AdvancePurchaseBucket(long days) {
  if (days < 0) throw Error(ErrorCode::kInvalidArgument, "negative advance purchase days");
  if (days <= 6) return "0-6";
  if (days <= 20) return "7-20";
  return "21+";
}

std::vector<ObservationSet> ReadBookingCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchemaMismatch, "empty file: missing header");
  std::vector<std::string> header;
  for (auto& cell : SplitLine(line)) header.push_back(Trim(cell));

  std::vector<std::string> missing;
  for (auto column : kCsvHeader) {
    if (std::find(header.begin(), header.end(), column) == header.end()) missing.emplace_back(column);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::kSchemaMismatch, "missing column(s): " + names);
  }
  for (std::size_t c = 0; c < kCsvHeader.size(); ++c) {
    if (header[c] != kCsvHeader[c]) {
      throw Error(ErrorCode::kSchemaMismatch, "column " + std::to_string(c + 1) + " must be '" +
                                                  std::string(kCsvHeader[c]) + "', found '" +
                                                  header[c] + "'");
    }
  }
  const std::vector<std::string> extra(header.begin() + kCsvHeader.size(), header.end());

  FeatureSchema schema = GridSchema();
  for (const auto& name : extra) schema.push_back({name, {}});
  std::vector<std::set<std::string>> seen(schema.size());

  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto cells = SplitLine(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kSchemaMismatch, "line " + std::to_string(line_no) + ": expected " +
                                                  std::to_string(header.size()) + " fields, found " +
                                                  std::to_string(cells.size()));
    }
    for (auto& c : cells) c = Trim(c);
    RawRow row;
    row.market = {cells[0], cells[1]};
    if (row.market.origin.empty() || row.market.destination.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line_no) + ": empty market");
    }
    row.values.emplace_back(AdvancePurchaseBucket(ParseNumber<long>(cells[2], line_no, kCsvHeader[2])));
    row.values.push_back(cells[3]);
    row.values.push_back(cells[4]);
    row.price = ParseNumber<double>(cells[5], line_no, kCsvHeader[5]);
    row.purchased = ParseNumber<int>(cells[6], line_no, kCsvHeader[6]);
    if (row.purchased != 0 && row.purchased != 1) {
      throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line_no) + ": purchased must be 0 or 1");
    }
    for (std::size_t e = 0; e < extra.size(); ++e) row.values.push_back(cells[kCsvHeader.size() + e]);
    for (std::size_t k = 0; k < schema.size(); ++k) seen[k].insert(row.values[k]);
    rows.push_back(std::move(row));
  }

  for (std::size_t k = 0; k < schema.size(); ++k) {
    auto& levels = schema[k].levels;
    for (const auto& v : seen[k]) {
      if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
    }
  }

  std::map<Market, ObservationSet> markets;
  for (const auto& raw : rows) {
    auto [it, inserted] = markets.try_emplace(raw.market);
    auto& set = it->second;
    if (inserted) {
      set.market = raw.market;
      set.schema = schema;
    }
    Observation obs;
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& levels = schema[k].levels;
      obs.levels.push_back(static_cast<std::size_t>(
          std::find(levels.begin(), levels.end(), raw.values[k]) - levels.begin()));
    }
    obs.price = raw.price;
    obs.purchased = raw.purchased;
    set.rows.push_back(std::move(obs));
  }
  if (markets.empty()) throw Error(ErrorCode::kTooFewRows, "no data rows");

  std::vector<ObservationSet> out;
  for (auto& [market, set] : markets) {
    if (set.rows.size() < kMinRowsPerMarket) {
      throw Error(ErrorCode::kTooFewRows, "market " + market.Key() + " has " +
                                              std::to_string(set.rows.size()) + " rows, need " +
                                              std::to_string(kMinRowsPerMarket));
    }
    std::set<double> prices;
    for (const auto& r : set.rows) prices.insert(r.price);
    set.price_grid.assign(prices.begin(), prices.end());
    set.Validate();
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<ObservationSet> ReadBookingCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return ReadBookingCsv(in);
}

void WriteBookingCsv(std::ostream& out, const ObservationSet& data) {
  const auto grid = GridSchema();
  if (data.schema.size() < grid.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "schema lacks the pricing grid features");
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (data.schema[k].name != grid[k].name) {
      throw Error(ErrorCode::kSchemaMismatch, "schema position " + std::to_string(k) +
                                                  " must be " + grid[k].name);
    }
  }
  for (std::size_t c = 0; c < kCsvHeader.size(); ++c) out << (c ? "," : "") << kCsvHeader[c];
  for (std::size_t k = grid.size(); k < data.schema.size(); ++k) out << ',' << data.schema[k].name;
  out << '\n';
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& row = data.rows[i];
    out << data.market.origin << ',' << data.market.destination << ','
        << DaysFor(row.levels[0], i) << ',' << data.schema[1].levels[row.levels[1]] << ','
        << data.schema[2].levels[row.levels[2]] << ',' << FormatPrice(row.price) << ','
        << row.purchased;
    for (std::size_t k = grid.size(); k < data.schema.size(); ++k) {
      out << ',' << data.schema[k].levels[row.levels[k]];
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed");
}

void WriteBookingCsv(const std::filesystem::path& path, const ObservationSet& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  WriteBookingCsv(out, data);
}

}  // namespace rxprice
