#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxprice/agent.hpp"
#include "rxprice/market_store.hpp"

namespace rxprice {

struct Turn {
  enum class Speaker { kUser, kAgent };
  Speaker speaker = Speaker::kUser;
  std::string text;
  std::optional<nlohmann::json> policy;
  std::optional<nlohmann::json> kpis;
};

struct Session {
  std::string id;
  AgentMemory memory;
  std::vector<Turn> transcript;  // append-only
  std::optional<PricingPolicy> active_policy;
};

struct ChatResponse {
  std::string reply;
  std::string decision_kind;
  nlohmann::json memory;
  std::optional<nlohmann::json> policy;
  std::optional<nlohmann::json> kpis;
  bool degraded = false;

  nlohmann::json ToJson() const;
};

// Textual KPI bubble, e.g. "Conversion 5.2% -> 6.1%, revenue uplift +1.5%".
std::string KpiSummary(const KpiReport& base, const KpiReport& policy);

// Flat JSON files under a root: sessions/, markets/, policies/. Every write
// goes to a temporary file that is then renamed over the target.
class Persistence {
 public:
  explicit Persistence(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  void SaveMarket(const MarketEntry& entry) const;
  std::vector<MarketEntry> LoadMarkets() const;

  void SavePolicy(const std::string& name, const PricingPolicy& policy) const;
  std::optional<PricingPolicy> LoadPolicy(const std::string& name) const;

  void SaveSession(const Session& session) const;
  std::vector<Session> LoadSessions() const;

  static void WriteAtomic(const std::filesystem::path& path, const std::string& content);

 private:
  std::filesystem::path root_;
};

struct ServiceOptions {
  std::optional<std::filesystem::path> data_dir;  // no persistence when empty
  std::chrono::milliseconds optimize_budget{30'000};
  IngestOptions ingest;
};

// Sessions, market data and the tools behind the agent. Turns within one
// session are serialized; different sessions run concurrently.
class PricingService {
 public:
  PricingService(ServiceOptions options, std::shared_ptr<CompletionClient> client = nullptr);

  // Markets ingested from the file; persisted when a data dir is set.
  std::vector<Market> IngestCsv(const std::filesystem::path& path);
  void AddMarket(MarketEntry entry);

  std::string CreateSession();
  // Throws Error(kUnknownSession).
  ChatResponse Chat(const std::string& session_id, const std::string& text);
  Session SessionSnapshot(const std::string& session_id) const;

  OptimizeResult Optimize(const Market& market, const OptimizeRequest& request) const;

  const MarketStore& markets() const { return markets_; }
  nlohmann::json MarketsJson() const;
  // {policy, kpis} of the stored base policy. Throws Error(kUnknownMarket).
  nlohmann::json BasePolicyJson(const Market& market) const;

 private:
  struct SessionSlot {
    std::mutex mutex;
    Session session;
  };

  std::shared_ptr<SessionSlot> FindSession(const std::string& id) const;
  ChatResponse Dispatch(Session& session, const ExecuteTool& call);

  ServiceOptions options_;
  Agent agent_;
  std::optional<Persistence> store_;
  MarketStore markets_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
};

}  // namespace rxprice
