#include <httplib.h>
#include <json.hpp>

#include "rxprice/agent.hpp"
#include "rxprice/error.hpp"

namespace rxprice {
namespace {

// Splits "http://host:port/path" into scheme-host-port and path.
std::pair<std::string, std::string> SplitEndpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpCompletionClient::HttpCompletionClient(std::string endpoint, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  std::tie(base_, path_) = SplitEndpoint(endpoint);
}

std::string HttpCompletionClient::Complete(const CompletionRequest& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const nlohmann::json body = {{"prompt", request.prompt},
                               {"temperature", request.temperature},
                               {"max_tokens", request.max_tokens}};
  auto response = client.Post(path_, body.dump(), "application/json");
  if (!response) {
    throw Error(ErrorCode::kClientTimeout,
                "completion endpoint unreachable: " + httplib::to_string(response.error()));
  }
  if (response->status != 200) {
    throw Error(ErrorCode::kClientTimeout,
                "completion endpoint returned HTTP " + std::to_string(response->status));
  }
  try {
    return nlohmann::json::parse(response->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kMalformedCompletion, "completion response lacks a text field");
  }
}

}  // namespace rxprice
