#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "rxprice/service.hpp"

namespace rxprice {

// JSON over HTTP:
//   POST /sessions                       -> {id}
//   POST /sessions/{id}/chat {text}      -> ChatResponse
//   GET  /markets
//   GET  /markets/{origin-destination}/policy/base
//   GET  /health
class HttpServer {
 public:
  explicit HttpServer(PricingService& service);
  ~HttpServer();

  // Returns the bound port; pass 0 for an ephemeral one.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Run();
  void Stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// flags > environment > config file
struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "./presaise-data";
  std::string llm_endpoint;  // empty: deterministic fallback only
  int llm_timeout_ms = 5000;
  int optimize_budget_ms = 30000;
};

struct ConfigOverrides {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::optional<std::string> llm_endpoint;
};

// Reads an optional JSON config file, then PRESAISE_DATA_DIR and
// PRESAISE_LLM_ENDPOINT, then `flags`.
ServerConfig ResolveConfig(const std::optional<std::string>& config_file, const ConfigOverrides& flags,
                           const std::function<std::optional<std::string>(const char*)>& getenv);

std::optional<std::string> SystemEnv(const char* name);

}  // namespace rxprice
