#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "rxprice/csv.hpp"
#include "rxprice/datagen.hpp"
#include "rxprice/error.hpp"
#include "rxprice/http_server.hpp"
#include "rxprice/serialization.hpp"
#include "rxprice/service.hpp"

namespace {

using rxprice::Error;
using rxprice::ErrorCode;
using rxprice::Json;

// Exit status per failure class.
int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownMarket:
    case ErrorCode::kUnknownSession: return 2;
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kTooFewRows:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kBadPartition:
    case ErrorCode::kEmptyPriceRange: return 3;
    case ErrorCode::kIo: return 4;
    default: return 1;
  }
}

rxprice::HttpServer* g_server = nullptr;

void OnSignal(int) {
  if (g_server) g_server->Stop();
}

void PrintPolicy(const rxprice::PricingPolicy& policy, const rxprice::KpiReport& kpis) {
  std::printf("market %s, %zu rule(s), objective %.2f%s\n", policy.market.Key().c_str(),
              policy.rules.size(), policy.objective,
              policy.proven_optimal ? "" : " (not proven optimal)");
  for (const auto& rule : policy.rules) {
    std::string conditions;
    for (std::size_t l = 0; l < rule.conditions.size(); ++l) {
      if (rule.conditions[l] == rxprice::kSkip) continue;
      if (!conditions.empty()) conditions += ", ";
      conditions += policy.layers[l].name + "=" + policy.layers[l].levels[rule.conditions[l]];
    }
    std::printf("  %-60s %8.2f  (%zu requests)\n", conditions.empty() ? "*" : conditions.c_str(),
                policy.RulePrice(rule), rule.covered.size());
  }
  std::printf("revenue/request %s, conversion %s", rxprice::FormatMoney(kpis.revenue_per_request).c_str(),
              rxprice::FormatPercent(kpis.conversion_rate).c_str());
  if (kpis.uplift) std::printf(", uplift %s", rxprice::FormatPercent(*kpis.uplift).c_str());
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational airline pricing: ingest bookings, optimize policies, serve the chat API"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  rxprice::ConfigOverrides overrides;
  bool json_output = false;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--data-dir", overrides.data_dir, "Data directory (env PRESAISE_DATA_DIR)");
  app.add_flag("--json", json_output, "Machine-readable JSON on stdout");

  std::string csv_path;
  auto* ingest = app.add_subcommand("ingest", "Ingest a booking CSV into the data directory");
  ingest->add_option("csv", csv_path, "Booking records")->required();

  std::string origin, destination;
  std::size_t rules = 1;
  std::optional<double> min_price, max_price;
  int budget_ms = 30000;
  auto* optimize = app.add_subcommand("optimize", "Optimize a pricing policy for an ingested market");
  optimize->add_option("origin", origin)->required();
  optimize->add_option("destination", destination)->required();
  optimize->add_option("--rules,-m", rules, "Maximum number of rules")->check(CLI::PositiveNumber);
  optimize->add_option("--min-price", min_price);
  optimize->add_option("--max-price", max_price);
  optimize->add_option("--time-budget-ms", budget_ms)->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "Run the HTTP JSON API");
  serve->add_option("--port", overrides.port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", overrides.host);
  serve->add_option("--llm-endpoint", overrides.llm_endpoint, "Completion endpoint (env PRESAISE_LLM_ENDPOINT)");

  std::string out_path;
  rxprice::DatagenConfig gen;
  auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic booking CSV and its ground truth");
  gen_data->add_option("out", out_path, "Output CSV")->required();
  gen_data->add_option("--seed", gen.seed);
  gen_data->add_option("--samples,-n", gen.samples)->check(CLI::PositiveNumber);
  gen_data->add_option("--covariates,-p", gen.covariates);
  gen_data->add_option("--origin", gen.market.origin);
  gen_data->add_option("--destination", gen.market.destination);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors share the bad-input code.
    const int status = app.exit(e);
    return status == 0 ? 0 : 3;
  }

  try {
    const auto config = rxprice::ResolveConfig(config_file, overrides, rxprice::SystemEnv);

    if (*gen_data) {
      const auto [data, truth] = rxprice::Generate(gen);
      rxprice::WriteBookingCsv(out_path, data);
      const std::string truth_path = out_path + ".truth.json";
      rxprice::Persistence::WriteAtomic(truth_path, rxprice::GroundTruthToJson(truth).dump(2) + "\n");
      if (json_output) {
        std::cout << Json{{"csv", out_path}, {"truth", truth_path}, {"rows", data.size()}}.dump() << '\n';
      } else {
        std::cout << "wrote " << data.size() << " rows to " << out_path << " and ground truth to " << truth_path << '\n';
      }
      return 0;
    }

    rxprice::ServiceOptions options;
    options.data_dir = config.data_dir;
    options.optimize_budget = std::chrono::milliseconds(config.optimize_budget_ms);

    if (*ingest) {
      rxprice::PricingService service(options);
      const auto markets = service.IngestCsv(csv_path);
      if (json_output) {
        std::cout << service.MarketsJson().dump() << '\n';
      } else {
        for (const auto& m : markets) std::cout << "ingested " << m.Key() << '\n';
      }
      return 0;
    }

    if (*optimize) {
      rxprice::PricingService service(options);
      rxprice::OptimizeRequest request;
      request.m = rules;
      if (min_price || max_price) request.bounds = rxprice::PriceBounds{min_price, max_price};
      request.limits.time_budget = std::chrono::milliseconds(budget_ms);
      const auto result = service.Optimize({origin, destination}, request);
      if (json_output) {
        std::cout << Json{{"policy", rxprice::PolicyToJson(result.policy)}, {"kpis", rxprice::KpiToJson(result.kpis)}}.dump(2)
                  << '\n';
      } else {
        PrintPolicy(result.policy, result.kpis);
      }
      return 0;
    }

    if (*serve) {
      std::shared_ptr<rxprice::CompletionClient> client;
      if (!config.llm_endpoint.empty()) {
        client = std::make_shared<rxprice::HttpCompletionClient>(config.llm_endpoint,
                                                                 std::chrono::milliseconds(config.llm_timeout_ms));
      }
      rxprice::PricingService service(options, client);
      rxprice::HttpServer server(service);
      const int port = server.Bind(config.host, config.port);
      g_server = &server;
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      std::cerr << "listening on " << config.host << ':' << port << " (data " << config.data_dir << ", "
                << (client ? "completion endpoint " + config.llm_endpoint : std::string("deterministic parser"))
                << ")\n";
      std::cout << Json{{"port", port}}.dump() << std::endl;
      server.Run();
      g_server = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << rxprice::ErrorCodeName(e.code()) << ": " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
