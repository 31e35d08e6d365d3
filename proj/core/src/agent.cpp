#include "rxprice/agent.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>
#include <sstream>

#include "rxprice/error.hpp"

namespace rxprice {

std::string_view IntentName(Intent intent) {
  switch (intent) {
    case Intent::kRunOpt: return "RUN_OPT";
    case Intent::kCfPriceBound: return "CF_PRICE_BOUND";
    case Intent::kShowBasePolicy: return "SHOW_BASE_POLICY";
    case Intent::kKpiRevenue: return "KPI_REVENUE";
    case Intent::kKpiConversion: return "KPI_CONVERSION";
    case Intent::kUnknown: return "Unknown";
  }
  return "Unknown";
}

namespace {

std::string Trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n\"'`.");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n\"'`.");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool IsBackendFailure(const Error& e) {
  return e.code() == ErrorCode::kClientTimeout || e.code() == ErrorCode::kMalformedCompletion;
}

std::string Upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

std::optional<Intent> ParseIntent(std::string_view name) {
  const std::string key = Upper(Trim(name));
  for (auto intent : {Intent::kRunOpt, Intent::kCfPriceBound, Intent::kShowBasePolicy,
                      Intent::kKpiRevenue, Intent::kKpiConversion}) {
    if (key == IntentName(intent)) return intent;
  }
  if (key == "UNKNOWN") return Intent::kUnknown;
  return std::nullopt;
}

bool SlotSet::AnyKnown() const {
  return origin || destination || min_price || max_price || cardinality;
}

std::string_view DecisionKind(const AgentDecision& decision) {
  switch (decision.index()) {
    case 0: return "execute";
    case 1: return "ask_follow_up";
    default: return "dialog";
  }
}

// ---------------------------------------------------------------------------
// Prompts

std::string RenderPrompt(std::string_view templ, std::string_view utterance) {
  std::string out(templ);
  constexpr std::string_view kSlot = "{utterance}";
  if (auto pos = out.find(kSlot); pos != std::string::npos) {
    out.replace(pos, kSlot.size(), utterance);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intent classification

Intent ClassifyIntentFallback(std::string_view utterance) {
  // Ordered: the first matching rule wins.
  static const std::array<std::pair<std::regex, Intent>, 5> kRules{{
      {std::regex(R"(\b(re-?)?optimi[sz]\w*|\boptimal\b)"), Intent::kRunOpt},
      {std::regex(R"(\bwhat[- ]if\b|\b(max(imum)?|min(imum)?|lowest|highest)\s+(price|fare)s?\b|\bprice (bound|cap|floor|ceiling)s?\b)"),
       Intent::kCfPriceBound},
      {std::regex(R"(\bconver(sion|t)\w*)"), Intent::kKpiConversion},
      {std::regex(R"(\brevenue\b)"), Intent::kKpiRevenue},
      {std::regex(R"(\b(base|current|historical|existing)\b.*\b(polic|pric|fare)\w*|\bfull fare\b)"),
       Intent::kShowBasePolicy},
  }};
  const std::string text = Lower(utterance);
  for (const auto& [pattern, intent] : kRules) {
    if (std::regex_search(text, pattern)) return intent;
  }
  return Intent::kUnknown;
}

IntentResult ClassifyIntent(std::string_view utterance, CompletionClient* client) {
  if (Trim(utterance).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "utterance is empty");
  }
  if (client != nullptr) {
    try {
      const std::string text = client->Complete(
          {RenderPrompt(PromptTemplates::Bundled().intent, utterance), 0.0, 16});
      std::string first = text.substr(0, text.find('\n'));
      if (auto colon = first.find(':'); colon != std::string::npos) first = first.substr(colon + 1);
      if (auto intent = ParseIntent(first)) return {*intent, false};
    } catch (const Error& e) {
      if (!IsBackendFailure(e)) throw;
    }
    return {ClassifyIntentFallback(utterance), true};
  }
  return {ClassifyIntentFallback(utterance), false};
}

// ---------------------------------------------------------------------------
// Slot filling

namespace {

struct Airport {
  std::string_view city;
  std::string_view code;
};

constexpr std::array<Airport, 34> kAirports{{
    {"atlanta", "ATL"},       {"austin", "AUS"},        {"baltimore", "BWI"},
    {"boston", "BOS"},        {"charlotte", "CLT"},     {"chicago", "ORD"},
    {"dallas", "DFW"},        {"denver", "DEN"},        {"detroit", "DTW"},
    {"fort lauderdale", "FLL"}, {"honolulu", "HNL"},    {"houston", "IAH"},
    {"las vegas", "LAS"},     {"los angeles", "LAX"},   {"miami", "MIA"},
    {"minneapolis", "MSP"},   {"nashville", "BNA"},     {"new orleans", "MSY"},
    {"new york", "JFK"},      {"newark", "EWR"},        {"orlando", "MCO"},
    {"philadelphia", "PHL"},  {"phoenix", "PHX"},       {"pittsburgh", "PIT"},
    {"portland", "PDX"},      {"raleigh", "RDU"},       {"salt lake city", "SLC"},
    {"san diego", "SAN"},     {"san francisco", "SFO"}, {"san jose", "SJC"},
    {"seattle", "SEA"},       {"st. louis", "STL"},     {"tampa", "TPA"},
    {"washington", "DCA"},
}};

constexpr std::array<std::string_view, 8> kExtraCodes{"LGA", "IAD", "MDW", "DAL",
                                                      "HOU", "OAK", "SNA", "BUR"};

bool IsKnownCode(std::string_view code) {
  for (const auto& a : kAirports) {
    if (a.code == code) return true;
  }
  return std::find(kExtraCodes.begin(), kExtraCodes.end(), code) != kExtraCodes.end();
}

struct Mention {
  std::size_t position;
  std::size_t length;
  std::string code;
};

std::vector<Mention> FindAirports(std::string_view utterance) {
  std::vector<Mention> mentions;
  const std::string original(utterance);
  const std::string lower = Lower(utterance);
  auto boundary = [&](std::size_t pos) {
    return pos >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[pos]));
  };
  for (const auto& a : kAirports) {
    for (auto pos = lower.find(a.city); pos != std::string::npos; pos = lower.find(a.city, pos + 1)) {
      if ((pos == 0 || boundary(pos - 1)) && boundary(pos + a.city.size())) {
        mentions.push_back({pos, a.city.size(), std::string(a.code)});
      }
    }
  }
  static const std::regex kCode(R"(\b[A-Z]{3}\b)");
  for (auto it = std::sregex_iterator(original.begin(), original.end(), kCode);
       it != std::sregex_iterator(); ++it) {
    if (IsKnownCode(it->str())) {
      mentions.push_back({static_cast<std::size_t>(it->position()), 3, it->str()});
    }
  }
  std::sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
    return a.position != b.position ? a.position < b.position : a.length > b.length;
  });
  // Drop mentions nested inside a longer one ("new york" vs "york").
  std::vector<Mention> out;
  for (auto& m : mentions) {
    if (!out.empty() && m.position < out.back().position + out.back().length) continue;
    out.push_back(std::move(m));
  }
  return out;
}

bool PrecededByDestinationCue(std::string_view lower, std::size_t position) {
  static const std::regex kCue(R"((\bto|\binto|\barriving(\s+(in|at))?|\bdestination(\s+is)?|\bbound for)\s*$)");
  const std::string before(lower.substr(0, position));
  return std::regex_search(before, kCue);
}

std::optional<double> ParseAmount(std::string text) {
  text.erase(std::remove(text.begin(), text.end(), ','), text.end());
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

struct PriceCue {
  std::size_t position;
  bool is_min;
  bool first_amount;  // "above $x": the amount right after the cue
};

void ExtractPrices(std::string_view utterance, SlotSet& slots) {
  const std::string lower = Lower(utterance);
  static const std::regex kBetween(R"(between\s+\$\s?([\d,]+(?:\.\d+)?)\s+and\s+\$\s?([\d,]+(?:\.\d+)?))");
  std::smatch match;
  if (std::regex_search(lower, match, kBetween)) {
    slots.min_price = ParseAmount(match[1].str());
    slots.max_price = ParseAmount(match[2].str());
    return;
  }

  static const std::regex kCue(
      R"(\b(minimum|min|lowest|floor|at least|maximum|max|highest|ceiling|cap|at most|above|over|below|under)\b)");
  std::vector<PriceCue> cues;
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), kCue); it != std::sregex_iterator(); ++it) {
    const std::string word = (*it)[1].str();
    const bool is_min = word == "minimum" || word == "min" || word == "lowest" || word == "floor" ||
                        word == "at least" || word == "above" || word == "over";
    const bool first = word == "above" || word == "over" || word == "below" || word == "under" ||
                       word == "at least" || word == "at most";
    cues.push_back({static_cast<std::size_t>(it->position()), is_min, first});
  }
  static const std::regex kAmount(R"(\$\s?([\d,]+(?:\.\d+)?))");
  for (std::size_t c = 0; c < cues.size(); ++c) {
    std::size_t end = c + 1 < cues.size() ? cues[c + 1].position : lower.size();
    const auto stop = lower.find_first_of(",;?!", cues[c].position);
    if (stop != std::string::npos) end = std::min(end, stop);
    const std::string clause = lower.substr(cues[c].position, end - cues[c].position);
    std::optional<double> amount;
    for (auto it = std::sregex_iterator(clause.begin(), clause.end(), kAmount);
         it != std::sregex_iterator(); ++it) {
      amount = ParseAmount((*it)[1].str());
      if (cues[c].first_amount) break;  // otherwise "from $200 to $250" keeps the last
    }
    if (!amount) continue;
    (cues[c].is_min ? slots.min_price : slots.max_price) = amount;
  }
}

std::optional<std::size_t> ParseCount(const std::string& token) {
  static const std::array<std::string_view, 21> kWords{
      "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
      "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
      "eighteen", "nineteen", "twenty"};
  for (std::size_t k = 0; k < kWords.size(); ++k) {
    if (token == kWords[k]) return k;
  }
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

void ExtractCardinality(std::string_view utterance, SlotSet& slots) {
  const std::string lower = Lower(utterance);
  static const std::regex kCount(
      R"(\b(\d+|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty|single)\s+(?:(?:different|distinct|pricing|price|decision)\s+)*(rules?|segments?|groups?)\b)");
  std::smatch match;
  if (std::regex_search(lower, match, kCount)) {
    const std::string token = match[1].str();
    if (token == "single") {
      slots.cardinality = 1;
    } else if (auto n = ParseCount(token); n && *n > 0) {
      slots.cardinality = *n;
    }
  }
}

std::string FormatAmount(double value) {
  std::ostringstream out;
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    out << static_cast<long long>(value);
  } else {
    out << value;
  }
  return out.str();
}

std::optional<std::string> NormalizeAirport(const std::string& raw) {
  const std::string value = Trim(raw);
  if (value.empty() || Lower(value) == "unknown") return std::nullopt;
  if (value.size() == 3 && std::all_of(value.begin(), value.end(),
                                       [](unsigned char c) { return std::isalpha(c); })) {
    // Transposed JFK shows up in completions; no real airport uses JKF.
    const std::string code = Upper(value);
    return code == "JKF" ? "JFK" : code;
  }
  return LookupAirport(value);
}

std::optional<double> ParsePriceValue(const std::string& raw) {
  std::string value = Trim(raw);
  if (!value.empty() && value.front() == '$') value.erase(0, 1);
  if (value.empty() || Lower(value) == "unknown") return std::nullopt;
  auto amount = ParseAmount(value);
  if (amount && *amount < 0.0) return std::nullopt;
  return amount;
}

}  // namespace

std::optional<std::string> LookupAirport(std::string_view name) {
  const std::string lower = Lower(Trim(name));
  for (const auto& a : kAirports) {
    if (a.city == lower) return std::string(a.code);
  }
  const std::string upper = Upper(Trim(name));
  if (IsKnownCode(upper)) return upper;
  return std::nullopt;
}

std::string FallbackSlotCompletion(std::string_view utterance, Intent intent) {
  SlotSet slots;
  const auto mentions = FindAirports(utterance);
  if (mentions.size() >= 2) {
    slots.origin = mentions[0].code;
    slots.destination = mentions[1].code;
  } else if (mentions.size() == 1) {
    if (PrecededByDestinationCue(Lower(utterance), mentions[0].position)) {
      slots.destination = mentions[0].code;
    } else {
      slots.origin = mentions[0].code;
    }
  }
  ExtractPrices(utterance, slots);
  ExtractCardinality(utterance, slots);
  return FormatSlotCompletion(intent, slots);
}

std::string FormatSlotCompletion(Intent intent, const SlotSet& slots) {
  std::ostringstream out;
  out << "function_call: " << IntentName(intent) << '\n';
  if (slots.origin || slots.destination) {
    out << "origin-destination: " << slots.origin.value_or("Unknown") << '-'
        << slots.destination.value_or("Unknown") << '\n';
  }
  if (slots.min_price || slots.max_price) {
    out << "price_bound: " << (slots.min_price ? FormatAmount(*slots.min_price) : "Unknown") << '-'
        << (slots.max_price ? FormatAmount(*slots.max_price) : "Unknown") << '\n';
  }
  if (slots.cardinality) out << "cardinality: " << *slots.cardinality << '\n';
  return out.str();
}

ParsedSlots ParseSlotCompletion(std::string_view text) {
  ParsedSlots parsed;
  bool recognised = false;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = Lower(Trim(line.substr(0, colon)));
    const std::string value = Trim(line.substr(colon + 1));
    // Pair values are written "A-B"; either side may be Unknown.
    auto split = [](const std::string& v) -> std::pair<std::string, std::string> {
      const auto dash = v.find('-');
      if (dash == std::string::npos) return {v, "Unknown"};
      return {v.substr(0, dash), v.substr(dash + 1)};
    };
    if (key == "function_call") {
      recognised = true;
      parsed.function_call = ParseIntent(value);
    } else if (key == "origin-destination" || key == "origin_destination") {
      recognised = true;
      auto [a, b] = split(value);
      parsed.slots.origin = NormalizeAirport(a);
      parsed.slots.destination = NormalizeAirport(b);
    } else if (key == "price_bound" || key == "price-bound") {
      recognised = true;
      auto [a, b] = split(value);
      parsed.slots.min_price = ParsePriceValue(a);
      parsed.slots.max_price = ParsePriceValue(b);
      if (parsed.slots.min_price && parsed.slots.max_price &&
          *parsed.slots.min_price > *parsed.slots.max_price) {
        parsed.slots.min_price.reset();
        parsed.slots.max_price.reset();
      }
    } else if (key == "cardinality") {
      recognised = true;
      if (auto n = ParseCount(Lower(value)); n && *n > 0) parsed.slots.cardinality = *n;
    }
  }
  if (!recognised) {
    throw Error(ErrorCode::kMalformedCompletion, "completion has no recognised slot lines");
  }
  return parsed;
}

SlotResult FillSlots(std::string_view utterance, Intent intent, CompletionClient* client) {
  if (intent == Intent::kUnknown) return {};
  if (client != nullptr) {
    try {
      const std::string text = client->Complete(
          {RenderPrompt(PromptTemplates::Bundled().slots, utterance), 0.0, 64});
      return {ParseSlotCompletion(text).slots, false};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMalformedCompletion) return {{}, true};
      if (e.code() != ErrorCode::kClientTimeout) throw;
    }
    return {ParseSlotCompletion(FallbackSlotCompletion(utterance, intent)).slots, true};
  }
  return {ParseSlotCompletion(FallbackSlotCompletion(utterance, intent)).slots, false};
}

// ---------------------------------------------------------------------------
// Memory and dispatch

AgentMemory MergeMemory(const AgentMemory& memory, Intent intent, const SlotSet& slots,
                        std::chrono::system_clock::time_point now) {
  AgentMemory out = memory;
  if (intent != Intent::kUnknown) out.function_call = intent;
  auto merge = [](auto& stored, const auto& incoming) {
    if (incoming) stored = incoming;
  };
  merge(out.slots.origin, slots.origin);
  merge(out.slots.destination, slots.destination);
  merge(out.slots.min_price, slots.min_price);
  merge(out.slots.max_price, slots.max_price);
  merge(out.slots.cardinality, slots.cardinality);
  // A new bound that crosses the stored opposite bound replaces it.
  if (out.slots.min_price && out.slots.max_price && *out.slots.min_price > *out.slots.max_price) {
    if (slots.min_price && !slots.max_price) out.slots.max_price.reset();
    else out.slots.min_price.reset();
  }
  if (intent != Intent::kUnknown || slots.AnyKnown()) out.updated_at = now;
  return out;
}

Intent EffectiveIntent(const AgentMemory& memory, Intent intent, const SlotSet& slots) {
  if (intent != Intent::kUnknown) return intent;
  if (slots.AnyKnown()) return memory.function_call;
  return Intent::kUnknown;
}

std::string FallbackDialogReply() {
  return "I'm PresAIse, happy to help with pricing! I can show the base pricing policy, "
         "optimize a pricing policy, report revenue or conversion, and evaluate what-if price "
         "bounds for a market. Could you tell me a bit more about what you'd like to do?";
}

AgentDecision Decide(const AgentMemory& memory, Intent intent, const SlotSet& slots) {
  const Intent tool = EffectiveIntent(memory, intent, slots);
  if (tool == Intent::kUnknown) return DialogReply{FallbackDialogReply()};

  // Memory is already merged, so stored values cover this turn's slots.
  SlotSet resolved = memory.slots;
  if (!resolved.origin || !resolved.destination) {
    AskFollowUp ask;
    ask.pending = tool;
    ask.missing = {std::string(kOriginDestinationSlot)};
    if (!resolved.origin && !resolved.destination) {
      ask.question =
          "Which market would you like to look at? Please give me an origin and destination "
          "city pair, for example DTW to JFK.";
    } else if (!resolved.destination) {
      ask.question = "Flights from " + *resolved.origin +
                     " to which destination? Please give me the destination city or airport.";
    } else {
      ask.question = "Flights to " + *resolved.destination +
                     " from which origin? Please give me the origin city or airport.";
    }
    return ask;
  }
  if (!resolved.cardinality) resolved.cardinality = 1;
  return ExecuteTool{tool, resolved};
}

TurnOutcome Agent::Turn(AgentMemory& memory, std::string_view utterance) const {
  TurnOutcome out;
  const IntentResult classified = ClassifyIntent(utterance, client_.get());
  out.intent = classified.intent;
  // Argument-only follow-ups ("DTW to JFK") are parsed for the pending tool.
  const Intent slot_intent =
      classified.intent != Intent::kUnknown ? classified.intent : memory.function_call;
  SlotResult filled = FillSlots(utterance, slot_intent, client_.get());
  out.slots = filled.slots;
  out.degraded = classified.degraded || filled.degraded;

  memory = MergeMemory(memory, out.intent, out.slots);
  out.decision = Decide(memory, out.intent, out.slots);

  if (auto* reply = std::get_if<DialogReply>(&out.decision); reply && client_) {
    try {
      const std::string text = Trim(client_->Complete(
          {RenderPrompt(PromptTemplates::Bundled().dialog, utterance), 0.7, 256}));
      if (!text.empty()) reply->text = text;
    } catch (const Error& e) {
      if (!IsBackendFailure(e)) throw;
      out.degraded = true;
    }
  }
  return out;
}

}  // namespace rxprice
