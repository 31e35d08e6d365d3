#include "rxprice/service.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "rxprice/csv.hpp"
#include "rxprice/error.hpp"
#include "rxprice/serialization.hpp"

namespace rxprice {
namespace fs = std::filesystem;

namespace {

std::string SafeName(const std::string& name) {
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
      throw Error(ErrorCode::kInvalidArgument, "unsafe file name: " + name);
    }
  }
  if (name.empty() || name.front() == '.') throw Error(ErrorCode::kInvalidArgument, "unsafe file name");
  return name;
}

Json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

std::vector<fs::path> JsonFiles(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.is_regular_file() && item.path().extension() == ".json") out.push_back(item.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string Money(double price) {
  char buf[32];
  if (price == static_cast<double>(static_cast<long long>(price))) {
    std::snprintf(buf, sizeof(buf), "$%lld", static_cast<long long>(price));
  } else {
    std::snprintf(buf, sizeof(buf), "$%.2f", price);
  }
  return buf;
}

std::string SignedPercent(double fraction) {
  const std::string text = FormatPercent(fraction);
  return fraction >= 0.0 ? "+" + text : text;
}

std::string BoundsText(const PriceBounds& bounds) {
  if (bounds.min && bounds.max) return "between " + Money(*bounds.min) + " and " + Money(*bounds.max);
  if (bounds.min) return "at or above " + Money(*bounds.min);
  if (bounds.max) return "at or below " + Money(*bounds.max);
  return "unbounded";
}

Json TurnToJson(const Turn& turn) {
  Json out = {{"speaker", turn.speaker == Turn::Speaker::kUser ? "user" : "agent"}, {"text", turn.text}};
  if (turn.policy) out["policy"] = *turn.policy;
  if (turn.kpis) out["kpis"] = *turn.kpis;
  return out;
}

Turn TurnFromJson(const Json& json) {
  Turn turn;
  turn.speaker = json.at("speaker") == "user" ? Turn::Speaker::kUser : Turn::Speaker::kAgent;
  turn.text = json.at("text").get<std::string>();
  if (json.contains("policy")) turn.policy = json.at("policy");
  if (json.contains("kpis")) turn.kpis = json.at("kpis");
  return turn;
}

Json SessionToJson(const Session& session) {
  Json transcript = Json::array();
  for (const auto& t : session.transcript) transcript.push_back(TurnToJson(t));
  Json out = {{"id", session.id}, {"memory", MemoryToJson(session.memory)}, {"transcript", transcript}};
  out["active_policy"] = session.active_policy ? PolicyToJson(*session.active_policy, true) : Json(nullptr);
  return out;
}

Session SessionFromJson(const Json& json) {
  Session session;
  session.id = json.at("id").get<std::string>();
  session.memory = MemoryFromJson(json.at("memory"));
  for (const auto& t : json.at("transcript")) session.transcript.push_back(TurnFromJson(t));
  if (!json.at("active_policy").is_null()) session.active_policy = PolicyFromJson(json.at("active_policy"));
  return session;
}

std::string NewSessionId() {
  static std::mutex mutex;
  static std::mt19937_64 engine{std::random_device{}()};
  std::lock_guard lock(mutex);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(engine()),
                static_cast<unsigned long long>(engine()));
  return buf;
}

}  // namespace

Json ChatResponse::ToJson() const {
  Json out = {{"reply", reply}, {"decision_kind", decision_kind}, {"memory", memory}, {"degraded", degraded}};
  out["policy"] = policy ? *policy : Json(nullptr);
  out["kpis"] = kpis ? *kpis : Json(nullptr);
  return out;
}

std::string KpiSummary(const KpiReport& base, const KpiReport& policy) {
  std::string text = "Conversion " + FormatPercent(base.conversion_rate) + " -> " +
                     FormatPercent(policy.conversion_rate);
  if (policy.uplift) text += ", revenue uplift " + SignedPercent(*policy.uplift);
  return text;
}

// ---------------------------------------------------------------------------
// Persistence

Persistence::Persistence(fs::path root) : root_(std::move(root)) {
  for (const char* sub : {"sessions", "markets", "policies"}) fs::create_directories(root_ / sub);
}

void Persistence::WriteAtomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "rename failed for " + path.string() + ": " + ec.message());
}

void Persistence::SaveMarket(const MarketEntry& entry) const {
  const Json json = {{"observations", ObservationsToJson(entry.observations)},
                     {"selection", SelectionToJson(entry.selection)},
                     {"demand", DemandFitToJson(entry.demand)}};
  const std::string key = SafeName(entry.observations.market.Key());
  WriteAtomic(root_ / "markets" / (key + ".json"), json.dump());
  SavePolicy(key + ".base", entry.base_policy);
}

std::vector<MarketEntry> Persistence::LoadMarkets() const {
  std::vector<MarketEntry> out;
  for (const auto& path : JsonFiles(root_ / "markets")) {
    const Json json = ReadJson(path);
    out.push_back(RestoreMarketEntry(ObservationsFromJson(json.at("observations")),
                                     SelectionFromJson(json.at("selection")),
                                     DemandFitFromJson(json.at("demand"))));
  }
  return out;
}

void Persistence::SavePolicy(const std::string& name, const PricingPolicy& policy) const {
  WriteAtomic(root_ / "policies" / (SafeName(name) + ".json"), PolicyToJson(policy, true).dump(2));
}

std::optional<PricingPolicy> Persistence::LoadPolicy(const std::string& name) const {
  const fs::path path = root_ / "policies" / (SafeName(name) + ".json");
  if (!fs::exists(path)) return std::nullopt;
  return PolicyFromJson(ReadJson(path));
}

void Persistence::SaveSession(const Session& session) const {
  WriteAtomic(root_ / "sessions" / (SafeName(session.id) + ".json"), SessionToJson(session).dump());
}

std::vector<Session> Persistence::LoadSessions() const {
  std::vector<Session> out;
  for (const auto& path : JsonFiles(root_ / "sessions")) out.push_back(SessionFromJson(ReadJson(path)));
  return out;
}

// ---------------------------------------------------------------------------
// Service

PricingService::PricingService(ServiceOptions options, std::shared_ptr<CompletionClient> client)
    : options_(std::move(options)), agent_(std::move(client)) {
  if (!options_.data_dir) return;
  store_.emplace(*options_.data_dir);
  for (auto& entry : store_->LoadMarkets()) {
    markets_.Put(std::make_shared<const MarketEntry>(std::move(entry)));
  }
  for (auto& session : store_->LoadSessions()) {
    auto slot = std::make_shared<SessionSlot>();
    slot->session = std::move(session);
    sessions_[slot->session.id] = std::move(slot);
  }
}

void PricingService::AddMarket(MarketEntry entry) {
  if (store_) store_->SaveMarket(entry);
  markets_.Put(std::make_shared<const MarketEntry>(std::move(entry)));
}

std::vector<Market> PricingService::IngestCsv(const fs::path& path) {
  std::vector<Market> out;
  for (auto& set : ReadBookingCsv(path)) {
    out.push_back(set.market);
    AddMarket(BuildMarketEntry(std::move(set), options_.ingest));
  }
  return out;
}

std::string PricingService::CreateSession() {
  auto slot = std::make_shared<SessionSlot>();
  std::lock_guard lock(sessions_mutex_);
  do {
    slot->session.id = NewSessionId();
  } while (sessions_.count(slot->session.id));
  if (store_) store_->SaveSession(slot->session);
  const std::string id = slot->session.id;
  sessions_[id] = std::move(slot);
  return id;
}

std::shared_ptr<PricingService::SessionSlot> PricingService::FindSession(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, "no such session: " + id);
  return it->second;
}

Session PricingService::SessionSnapshot(const std::string& session_id) const {
  auto slot = FindSession(session_id);
  std::lock_guard lock(slot->mutex);
  return slot->session;
}

OptimizeResult PricingService::Optimize(const Market& market, const OptimizeRequest& request) const {
  return OptimizePolicy(*markets_.Get(market), request);
}

Json PricingService::MarketsJson() const {
  Json out = Json::array();
  for (const auto& market : markets_.Markets()) {
    const auto entry = markets_.Find(market);
    if (!entry) continue;
    std::vector<std::string> selected;
    for (auto k : entry->selected_features) selected.push_back(entry->observations.schema[k].name);
    out.push_back({{"market", market.Key()},
                   {"origin", market.origin},
                   {"destination", market.destination},
                   {"rows", entry->observations.size()},
                   {"price_grid", entry->observations.price_grid},
                   {"base_price", entry->observations.price_grid[entry->base_price_index]},
                   {"selected_features", selected}});
  }
  return out;
}

Json PricingService::BasePolicyJson(const Market& market) const {
  const auto entry = markets_.Get(market);
  return {{"policy", PolicyToJson(entry->base_policy)}, {"kpis", KpiToJson(BaseKpis(*entry))}};
}

ChatResponse PricingService::Chat(const std::string& session_id, const std::string& text) {
  auto slot = FindSession(session_id);
  std::lock_guard lock(slot->mutex);
  Session& session = slot->session;
  session.transcript.push_back({Turn::Speaker::kUser, text, std::nullopt, std::nullopt});

  const TurnOutcome outcome = agent_.Turn(session.memory, text);
  ChatResponse response;
  response.decision_kind = std::string(DecisionKind(outcome.decision));
  response.degraded = outcome.degraded;
  if (const auto* call = std::get_if<ExecuteTool>(&outcome.decision)) {
    ChatResponse tool = Dispatch(session, *call);
    response.reply = std::move(tool.reply);
    if (!tool.decision_kind.empty()) response.decision_kind = tool.decision_kind;
    response.policy = std::move(tool.policy);
    response.kpis = std::move(tool.kpis);
  } else if (const auto* ask = std::get_if<AskFollowUp>(&outcome.decision)) {
    response.reply = ask->question;
  } else {
    response.reply = std::get<DialogReply>(outcome.decision).text;
  }
  response.memory = MemoryToJson(session.memory);

  session.transcript.push_back({Turn::Speaker::kAgent, response.reply, response.policy, response.kpis});
  if (store_) store_->SaveSession(session);
  return response;
}

ChatResponse PricingService::Dispatch(Session& session, const ExecuteTool& call) {
  ChatResponse out;
  const Market market{call.slots.origin.value_or(""), call.slots.destination.value_or("")};
  const auto entry = markets_.Find(market);
  if (!entry) {
    out.reply = "Sorry, I have no booking data for the " + market.Key() +
                " market (UnknownMarket). Ingest a CSV for it or pick another market.";
    out.decision_kind = "dialog";
    return out;
  }
  const auto& grid = entry->observations.price_grid;
  const PricingPolicy* current = &entry->base_policy;
  if (session.active_policy && session.active_policy->market == market) current = &*session.active_policy;

  try {
    switch (call.tool) {
      case Intent::kShowBasePolicy: {
        const KpiReport kpis = BaseKpis(*entry);
        out.reply = "The current pricing policy for " + market.Key() + " is " +
                    Money(grid[entry->base_price_index]) + " for every booking request. Expected conversion is " +
                    FormatPercent(kpis.conversion_rate) + " at " + FormatMoney(kpis.revenue_per_request) +
                    " revenue per request.";
        out.policy = PolicyToJson(entry->base_policy);
        out.kpis = KpiToJson(kpis);
        break;
      }
      case Intent::kRunOpt: {
        OptimizeRequest request;
        request.m = call.slots.cardinality.value_or(1);
        if (call.slots.min_price || call.slots.max_price) {
          request.bounds = PriceBounds{call.slots.min_price, call.slots.max_price};
        }
        request.limits.time_budget = options_.optimize_budget;
        OptimizeResult result = OptimizePolicy(*entry, request);
        const KpiReport base = BaseKpis(*entry);
        std::ostringstream reply;
        const std::size_t rules = result.policy.rules.size();
        if (rules == 1) {
          reply << "The best single price for " << market.Key() << " is "
                << Money(result.policy.RulePrice(result.policy.rules.front())) << ", up from "
                << Money(grid[entry->base_price_index]) << " today. ";
        } else {
          reply << "Here is an optimized policy for " << market.Key() << " with " << rules
                << " rules (at most " << request.m << "). ";
        }
        if (request.bounds) reply << "Prices are kept " << BoundsText(*request.bounds) << ". ";
        reply << KpiSummary(base, result.kpis) << '.';
        if (!result.policy.proven_optimal) reply << " This is the best policy found within the time budget.";
        out.reply = reply.str();
        out.policy = PolicyToJson(result.policy);
        out.kpis = KpiToJson(result.kpis);
        session.active_policy = std::move(result.policy);
        break;
      }
      case Intent::kCfPriceBound: {
        const PriceBounds bounds{call.slots.min_price, call.slots.max_price};
        const ClampResult clamped = ClampPolicy(*current, bounds, entry->cf, entry->base_assignment,
                                                entry->slack_penalty, entry->base_price_index);
        out.reply = "With prices kept " + BoundsText(bounds) + ": " +
                    KpiSummary(BaseKpis(*entry), clamped.kpis) + '.';
        out.policy = PolicyToJson(clamped.policy);
        out.kpis = KpiToJson(clamped.kpis);
        break;
      }
      case Intent::kKpiRevenue:
      case Intent::kKpiConversion: {
        const KpiReport kpis = PolicyKpis(*entry, *current);
        const std::string which = current == &entry->base_policy ? "the base policy" : "the current policy";
        if (call.tool == Intent::kKpiRevenue) {
          out.reply = "Expected revenue per request under " + which + " for " + market.Key() + " is " +
                      FormatMoney(kpis.revenue_per_request);
          if (kpis.uplift) out.reply += " (" + SignedPercent(*kpis.uplift) + " vs base)";
        } else {
          out.reply = "Expected conversion under " + which + " for " + market.Key() + " is " +
                      FormatPercent(kpis.conversion_rate);
        }
        out.reply += '.';
        out.kpis = KpiToJson(kpis);
        break;
      }
      case Intent::kUnknown:
        out.reply = FallbackDialogReply();
        break;
    }
  } catch (const Error& e) {
    out.reply = "Sorry, I could not complete that request (" + std::string(ErrorCodeName(e.code())) +
                "): " + e.what();
    out.decision_kind = "dialog";
    out.policy.reset();
    out.kpis.reset();
  }
  return out;
}

}  // namespace rxprice
