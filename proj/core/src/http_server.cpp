#include "rxprice/http_server.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "rxprice/error.hpp"
#include "rxprice/serialization.hpp"

namespace rxprice {
namespace {

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownMarket: return 404;
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

void SendJson(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, const Error& e) {
  SendJson(res, {{"error", e.what()}, {"code", std::string(ErrorCodeName(e.code()))}}, StatusFor(e.code()));
}

Market ParseMarketKey(const std::string& key) {
  const auto dash = key.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == key.size()) {
    throw Error(ErrorCode::kInvalidArgument, "market must look like ORIGIN-DESTINATION");
  }
  return {key.substr(0, dash), key.substr(dash + 1)};
}

template <typename F>
httplib::Server::Handler Guard(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      SendError(res, e);
    } catch (const Json::exception& e) {
      SendJson(res, {{"error", e.what()}, {"code", "InvalidArgument"}}, 400);
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(PricingService& s) : service(s) {}
  PricingService& service;
  httplib::Server server;
};

HttpServer::HttpServer(PricingService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->server;
  auto& svc = impl_->service;

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    SendJson(res, {{"status", "ok"}});
  });
  server.Post("/sessions", Guard([&svc](const httplib::Request&, httplib::Response& res) {
    SendJson(res, {{"id", svc.CreateSession()}}, 201);
  }));
  server.Post(R"(/sessions/([^/]+)/chat)", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    const std::string text = body.at("text").get<std::string>();
    SendJson(res, svc.Chat(req.matches[1], text).ToJson());
  }));
  server.Get("/markets", Guard([&svc](const httplib::Request&, httplib::Response& res) {
    SendJson(res, svc.MarketsJson());
  }));
  server.Get(R"(/markets/([^/]+)/policy/base)", Guard([&svc](const httplib::Request& req, httplib::Response& res) {
    SendJson(res, svc.BasePolicyJson(ParseMarketKey(req.matches[1])));
  }));
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::Run() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

std::optional<std::string> SystemEnv(const char* name) {
  const char* value = std::getenv(name);
  if (!value || !*value) return std::nullopt;
  return std::string(value);
}

ServerConfig ResolveConfig(const std::optional<std::string>& config_file, const ConfigOverrides& flags,
                           const std::function<std::optional<std::string>(const char*)>& getenv) {
  ServerConfig config;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + *config_file);
    Json json;
    try {
      json = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, "config " + *config_file + ": " + e.what());
    }
    config.host = json.value("host", config.host);
    config.port = json.value("port", config.port);
    config.data_dir = json.value("data_dir", config.data_dir);
    config.llm_endpoint = json.value("llm_endpoint", config.llm_endpoint);
    config.llm_timeout_ms = json.value("llm_timeout_ms", config.llm_timeout_ms);
    config.optimize_budget_ms = json.value("optimize_budget_ms", config.optimize_budget_ms);
  }
  if (auto v = getenv("PRESAISE_DATA_DIR")) config.data_dir = *v;
  if (auto v = getenv("PRESAISE_LLM_ENDPOINT")) config.llm_endpoint = *v;
  if (flags.host) config.host = *flags.host;
  if (flags.port) config.port = *flags.port;
  if (flags.data_dir) config.data_dir = *flags.data_dir;
  if (flags.llm_endpoint) config.llm_endpoint = *flags.llm_endpoint;
  return config;
}

}  // namespace rxprice
