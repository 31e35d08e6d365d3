#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "rxprice/csv.hpp"
#include "rxprice/datagen.hpp"
#include "rxprice/error.hpp"
#include "rxprice/http_server.hpp"
#include "rxprice/serialization.hpp"
#include "rxprice/service.hpp"

// After Eigen: the resolver header defines a macro that clashes with Eigen names.
#include <httplib.h>

namespace rxprice {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("rxprice_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ObservationSet Market(const char* origin, const char* destination, std::uint64_t seed,
                      std::size_t samples = 600) {
  DatagenConfig config;
  config.market = {origin, destination};
  config.seed = seed;
  config.samples = samples;
  return Generate(config).first;
}

std::vector<ObservationSet> ReadCsvText(const std::string& text) {
  std::istringstream in(text);
  return ReadBookingCsv(in);
}

// CSV -------------------------------------------------------------------------

TEST(Csv, MissingColumnIsNamed) {
  try {
    ReadCsvText("origin,destination,advance_purchase_days,stay_restriction,fare_discount_level,price\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
    EXPECT_NE(std::string(e.what()).find("purchased"), std::string::npos);
  }
}

TEST(Csv, MisorderedHeaderIsRejected) {
  EXPECT_THROW(ReadCsvText("destination,origin,advance_purchase_days,stay_restriction,"
                           "fare_discount_level,price,purchased\n"),
               Error);
}

TEST(Csv, SmallMarketIsTooFewRows) {
  std::string text(kCsvHeader[0]);
  for (std::size_t c = 1; c < kCsvHeader.size(); ++c) text += "," + std::string(kCsvHeader[c]);
  text += "\n";
  for (int i = 0; i < 10; ++i) text += "DTW,JFK,3,none,full,510,1\n";
  try {
    ReadCsvText(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewRows);
  }
}

TEST(Csv, AdvancePurchaseBuckets) {
  EXPECT_EQ(AdvancePurchaseBucket(0), "0-6");
  EXPECT_EQ(AdvancePurchaseBucket(6), "0-6");
  EXPECT_EQ(AdvancePurchaseBucket(7), "7-20");
  EXPECT_EQ(AdvancePurchaseBucket(21), "21+");
  EXPECT_THROW(AdvancePurchaseBucket(-1), Error);
}

TEST(Csv, RoundTripPreservesObservations) {
  const auto data = Market("DTW", "JFK", 3, 200);
  std::ostringstream out;
  WriteBookingCsv(out, data);
  const auto back = ReadCsvText(out.str());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].market, data.market);
  EXPECT_EQ(back[0].price_grid, data.price_grid);
  ASSERT_EQ(back[0].size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[0].rows[i].levels, data.rows[i].levels);
    EXPECT_EQ(back[0].rows[i].price, data.rows[i].price);
    EXPECT_EQ(back[0].rows[i].purchased, data.rows[i].purchased);
  }
}

TEST(Csv, SplitsMarkets) {
  std::ostringstream out;
  WriteBookingCsv(out, Market("DTW", "JFK", 1, 40));
  std::ostringstream second;
  WriteBookingCsv(second, Market("DTW", "LAX", 2, 50));
  const std::string body = second.str().substr(second.str().find('\n') + 1);
  const auto sets = ReadCsvText(out.str() + body);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].market.Key(), "DTW-JFK");
  EXPECT_EQ(sets[1].size(), 50u);
}

// Ingest ----------------------------------------------------------------------

TEST(Ingest, RecoversPlantedSupportFromCsv) {
  // Default generator settings, fixed seed. Some seeds also keep one
  // treatment-only feature; see the sweep below.
  DatagenConfig config;
  config.seed = 1;
  const auto [data, truth] = Generate(config);
  TempDir dir;
  WriteBookingCsv(dir.path() / "bookings.csv", data);
  PricingService service({});
  service.IngestCsv(dir.path() / "bookings.csv");
  const auto entry = service.markets().Get(data.market);
  EXPECT_EQ(entry->selected_features, truth.true_support);
  EXPECT_LT(entry->demand.price_coef, 0.0);
  ASSERT_EQ(entry->base_policy.rules.size(), 1u);
  EXPECT_EQ(entry->base_policy.rules[0].price_index, ModalPriceIndex(data));
}

TEST(Ingest, KeepsPlantedFeaturesAndNoPureNoise) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DatagenConfig config;
    config.seed = seed;
    const auto [data, truth] = Generate(config);
    const auto entry = BuildMarketEntry(data);
    EXPECT_TRUE(std::includes(entry.selected_features.begin(), entry.selected_features.end(),
                              truth.true_support.begin(), truth.true_support.end()))
        << "seed " << seed;
    for (auto f : entry.selected_features) {
      const bool planted = std::binary_search(truth.true_support.begin(), truth.true_support.end(), f);
      const bool treatment_only = std::find(truth.treatment_only.begin(), truth.treatment_only.end(), f) !=
                                  truth.treatment_only.end();
      EXPECT_TRUE(planted || treatment_only) << "seed " << seed << " feature " << f;
    }
  }
}

// Chat ------------------------------------------------------------------------

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_.AddMarket(BuildMarketEntry(Market("DTW", "JFK", 1)));
    service_.AddMarket(BuildMarketEntry(Market("DTW", "LAX", 2)));
  }
  PricingService service_{ServiceOptions{}};
};

TEST_F(ServiceTest, IntroScenario) {
  const auto id = service_.CreateSession();
  const auto first = service_.Chat(id, "Can you show me the base pricing policy");
  EXPECT_EQ(first.decision_kind, "ask_follow_up");
  EXPECT_NE(first.reply.find("origin"), std::string::npos);
  EXPECT_FALSE(first.policy.has_value());
  EXPECT_EQ(first.memory["function_call"], "SHOW_BASE_POLICY");

  const auto second = service_.Chat(id, "DTW to JFK");
  EXPECT_EQ(second.decision_kind, "execute");
  ASSERT_TRUE(second.policy.has_value());
  EXPECT_EQ((*second.policy)["rules"].size(), 1u);
  EXPECT_EQ((*second.policy)["market"], "DTW-JFK");
  ASSERT_TRUE(second.kpis.has_value());
  EXPECT_EQ((*second.kpis)["uplift_pct"], 0.0);
  EXPECT_EQ(second.memory["origin-destination"], "DTW-JFK");

  const auto session = service_.SessionSnapshot(id);
  ASSERT_EQ(session.transcript.size(), 4u);
  EXPECT_EQ(session.transcript[0].speaker, Turn::Speaker::kUser);
  EXPECT_EQ(session.transcript[3].speaker, Turn::Speaker::kAgent);
  EXPECT_TRUE(session.transcript[3].policy.has_value());
}

TEST_F(ServiceTest, ReoptimizeWithRuleCap) {
  const auto id = service_.CreateSession();
  service_.Chat(id, "Show me the base policy for Detroit to New York");
  const auto reply = service_.Chat(id, "Can we set the minimum price from $200 to $250, and re-optimize the "
                                       "pricing policy with no more than 10 rules?");
  EXPECT_EQ(reply.decision_kind, "execute");
  ASSERT_TRUE(reply.policy.has_value());
  EXPECT_LE((*reply.policy)["rules"].size(), 10u);
  EXPECT_EQ((*reply.policy)["m"], 10);
  EXPECT_EQ(reply.memory["cardinality"], 10);
  EXPECT_TRUE(service_.SessionSnapshot(id).active_policy.has_value());

  // KPIs now refer to the optimized policy.
  const auto kpi = service_.Chat(id, "What is the expected revenue?");
  ASSERT_TRUE(kpi.kpis.has_value());
  EXPECT_EQ((*kpi.kpis)["revenue_per_request"], (*reply.kpis)["revenue_per_request"]);
  EXPECT_NE(kpi.reply.find("current policy"), std::string::npos);
}

TEST_F(ServiceTest, UnknownMarketKeepsSessionAlive) {
  const auto id = service_.CreateSession();
  const auto reply = service_.Chat(id, "Show me the base policy from Boston to Miami");
  EXPECT_NE(reply.reply.find("UnknownMarket"), std::string::npos);
  EXPECT_NE(reply.reply.find("BOS-MIA"), std::string::npos);
  EXPECT_FALSE(reply.policy.has_value());
  EXPECT_EQ(service_.Chat(id, "Detroit to Los Angeles").decision_kind, "execute");
}

TEST_F(ServiceTest, UnknownSessionThrows) {
  try {
    service_.Chat("nope", "hello");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownSession);
  }
}

TEST_F(ServiceTest, EmptyPriceRangeIsReadable) {
  const auto id = service_.CreateSession();
  service_.Chat(id, "Show me the base policy for DTW to JFK");
  const auto reply = service_.Chat(id, "What if we lower the maximum price to $100?");
  EXPECT_EQ(reply.decision_kind, "dialog");
  EXPECT_NE(reply.reply.find("EmptyPriceRange"), std::string::npos);
}

TEST_F(ServiceTest, WhatIfBoundsReprice) {
  const auto id = service_.CreateSession();
  service_.Chat(id, "Optimize DTW to JFK with at most 4 rules");
  const auto reply = service_.Chat(id, "What if we lower the maximum price to $550?");
  ASSERT_TRUE(reply.policy.has_value());
  for (const auto& rule : (*reply.policy)["rules"]) EXPECT_LE(rule["price"].get<double>(), 550.0);
}

TEST_F(ServiceTest, ShowBasePolicyIsIdempotent) {
  const auto id = service_.CreateSession();
  const auto a = service_.Chat(id, "Show me the base policy for DTW to JFK");
  const auto b = service_.Chat(id, "Show me the base policy for DTW to JFK");
  EXPECT_EQ(a.policy->dump(), b.policy->dump());
  EXPECT_EQ(a.kpis->dump(), b.kpis->dump());
  EXPECT_EQ(a.reply, b.reply);
}

TEST_F(ServiceTest, SessionIsolationUnderRandomInterleaving) {
  const std::vector<std::string> neutral{"What is the expected revenue?", "What is the conversion rate?",
                                         "Show me the base pricing policy", "optimize with 2 rules",
                                         "What if the maximum price is $600?"};
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const std::array<std::string, 2> ids{service_.CreateSession(), service_.CreateSession()};
    const std::array<std::string, 2> opener{"Show me the base policy for Detroit to New York",
                                            "Show me the base policy for Detroit to Los Angeles"};
    const std::array<std::string, 2> market{"DTW-JFK", "DTW-LAX"};
    std::array<bool, 2> opened{false, false};
    for (int turn = 0; turn < 16; ++turn) {
      const int s = static_cast<int>(rng() % 2);
      const std::string text = opened[s] ? neutral[rng() % neutral.size()] : opener[s];
      opened[s] = true;
      const auto reply = service_.Chat(ids[s], text);
      EXPECT_EQ(reply.memory["origin-destination"], market[s]);
      if (reply.policy) EXPECT_EQ((*reply.policy)["market"], market[s]);
    }
  }
}

TEST_F(ServiceTest, ConcurrentSessionsDoNotInterfere) {
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      const auto id = service_.CreateSession();
      const std::string city = t % 2 ? "Los Angeles" : "New York";
      const std::string key = t % 2 ? "DTW-LAX" : "DTW-JFK";
      for (int k = 0; k < 5; ++k) {
        const auto reply = service_.Chat(id, "Show me the base policy for Detroit to " + city);
        if (reply.memory["origin-destination"] != key) ++failures;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(failures.load(), 0);
}

TEST(KpiSummary, DisplayFixture) {
  // Display-format fixture only: base $510, single rule at $475.
  KpiReport base{510 * 0.052, 0.052, 0.0, 1000, 52};
  KpiReport policy{475 * 0.061, 0.061, 0.015, 1000, 61};
  EXPECT_EQ(KpiSummary(base, policy), "Conversion 5.2% -> 6.1%, revenue uplift +1.5%");
  const auto json = KpiToJson(policy);
  EXPECT_EQ(json["conversion_rate"], 6.1);
  EXPECT_EQ(json["uplift_pct"], 1.5);
  EXPECT_EQ(json["revenue_per_request"], 28.98);
}

// Persistence -----------------------------------------------------------------

TEST(Persistence, PolicyRoundTripIsByteIdentical) {
  TempDir dir;
  std::string base_json, optimized_json, session_id;
  {
    ServiceOptions options;
    options.data_dir = dir.path();
    PricingService service(options);
    service.AddMarket(BuildMarketEntry(Market("DTW", "JFK", 4)));
    base_json = service.BasePolicyJson({"DTW", "JFK"}).dump();
    session_id = service.CreateSession();
    const auto reply = service.Chat(session_id, "Optimize DTW to JFK with 3 rules");
    optimized_json = PolicyToJson(*service.SessionSnapshot(session_id).active_policy, true).dump();
  }
  ServiceOptions options;
  options.data_dir = dir.path();
  PricingService reloaded(options);
  EXPECT_EQ(reloaded.BasePolicyJson({"DTW", "JFK"}).dump(), base_json);
  const auto session = reloaded.SessionSnapshot(session_id);
  ASSERT_TRUE(session.active_policy.has_value());
  EXPECT_EQ(PolicyToJson(*session.active_policy, true).dump(), optimized_json);
  EXPECT_EQ(session.memory.slots.origin, "DTW");
  EXPECT_EQ(session.transcript.size(), 2u);

  Persistence store(dir.path());
  const auto stored = store.LoadPolicy("DTW-JFK.base");
  ASSERT_TRUE(stored.has_value());
  EXPECT_EQ(PolicyToJson(*stored).dump(), nlohmann::json::parse(base_json)["policy"].dump());
  EXPECT_FALSE(fs::exists(dir.path() / "policies" / "DTW-JFK.base.json.tmp"));
}

TEST(Persistence, RejectsPathTraversal) {
  TempDir dir;
  Persistence store(dir.path());
  EXPECT_THROW(store.LoadPolicy("../etc"), Error);
}

// Config ----------------------------------------------------------------------

TEST(Config, FlagsBeatEnvironmentBeatFile) {
  TempDir dir;
  const auto file = dir.path() / "config.json";
  std::ofstream(file) << R"({"data_dir": "from-file", "port": 9000, "llm_endpoint": "http://file"})";
  std::map<std::string, std::string> env{{"PRESAISE_DATA_DIR", "from-env"}};
  auto getenv = [&](const char* name) -> std::optional<std::string> {
    const auto it = env.find(name);
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  };
  auto config = ResolveConfig(file.string(), {}, getenv);
  EXPECT_EQ(config.data_dir, "from-env");
  EXPECT_EQ(config.port, 9000);
  EXPECT_EQ(config.llm_endpoint, "http://file");
  ConfigOverrides flags;
  flags.data_dir = "from-flag";
  flags.port = 7000;
  config = ResolveConfig(file.string(), flags, getenv);
  EXPECT_EQ(config.data_dir, "from-flag");
  EXPECT_EQ(config.port, 7000);
}

// HTTP ------------------------------------------------------------------------

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_.AddMarket(BuildMarketEntry(Market("DTW", "JFK", 1)));
    server_ = std::make_unique<HttpServer>(service_);
    port_ = server_->Bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->Run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !server_->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    server_->Stop();
    thread_.join();
  }

  nlohmann::json Chat(const std::string& id, const std::string& text) {
    const auto res = client_->Post("/sessions/" + id + "/chat", nlohmann::json{{"text", text}}.dump(),
                                   "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    return nlohmann::json::parse(res->body);
  }

  PricingService service_{ServiceOptions{}};
  std::unique_ptr<HttpServer> server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpTest, Health) {
  const auto res = client_->Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
}

TEST_F(HttpTest, IntroScenarioEndToEnd) {
  const auto created = client_->Post("/sessions", "", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = nlohmann::json::parse(created->body)["id"];

  const auto first = Chat(id, "Can you show me the base pricing policy");
  EXPECT_EQ(first["decision_kind"], "ask_follow_up");
  EXPECT_TRUE(first["policy"].is_null());
  const auto second = Chat(id, "DTW to JFK");
  EXPECT_EQ(second["decision_kind"], "execute");
  EXPECT_EQ(second["policy"]["rules"].size(), 1u);
  EXPECT_EQ(second["memory"]["function_call"], "SHOW_BASE_POLICY");
  EXPECT_FALSE(second["kpis"].is_null());
}

TEST_F(HttpTest, MarketsAndBasePolicy) {
  const auto markets = client_->Get("/markets");
  ASSERT_TRUE(markets);
  const auto list = nlohmann::json::parse(markets->body);
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0]["market"], "DTW-JFK");
  const auto base = client_->Get("/markets/DTW-JFK/policy/base");
  ASSERT_TRUE(base);
  EXPECT_EQ(base->status, 200);
  EXPECT_EQ(nlohmann::json::parse(base->body)["policy"]["rules"].size(), 1u);
  const auto missing = client_->Get("/markets/AAA-BBB/policy/base");
  EXPECT_EQ(missing->status, 404);
}

TEST_F(HttpTest, ErrorsAreJson) {
  const auto unknown = client_->Post("/sessions/nope/chat", R"({"text":"hi"})", "application/json");
  ASSERT_TRUE(unknown);
  EXPECT_EQ(unknown->status, 404);
  EXPECT_EQ(nlohmann::json::parse(unknown->body)["code"], "UnknownSession");
  const auto created = client_->Post("/sessions", "", "application/json");
  const std::string id = nlohmann::json::parse(created->body)["id"];
  const auto bad = client_->Post("/sessions/" + id + "/chat", "not json", "application/json");
  EXPECT_EQ(bad->status, 400);
}

}  // namespace
}  // namespace rxprice
