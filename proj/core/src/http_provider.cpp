// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/http_provider.hpp"

#include <cstdlib>

#include <httplib.h>

namespace buzzdef::llm {

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("not an absolute URL: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

Json HttpChatProvider::request_body(const ProviderCall& call) {
  Json body{{"model", call.backbone->model},
            {"messages", Json::array({Json{{"role", "user"}, {"content", call.prompt}}})},
            {"temperature", call.temperature},
            {"max_tokens", call.max_output}};
  if (call.seed) body["seed"] = *call.seed;
  return body;
}

std::string HttpChatProvider::parse_response(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ProviderError("response is not JSON", 0, true);
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProviderError("message content is not text", 0, false);
    return content.get<std::string>();
  } catch (const Json::exception& e) {
    throw ProviderError(std::string("unexpected response shape: ") + e.what(), 0, false);
  }
}

std::string HttpChatProvider::complete(const ProviderCall& call) {
  const auto& b = *call.backbone;
  const auto url = split_url(b.endpoint);
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!b.auth_env.empty()) {
    const char* key = std::getenv(b.auth_env.c_str());
    if (!key || !*key)
      throw ProviderError("environment variable " + b.auth_env + " is not set", 0, false);
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = cli.Post(url.path, headers, request_body(call).dump(), "application/json");
  if (!res) throw ProviderError("transport error: " + httplib::to_string(res.error()), 0, true);
  const int status = res->status;
  if (status < 200 || status >= 300) {
    const bool retryable = status == 408 || status == 429 || status >= 500;
    throw ProviderError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200), status,
                        retryable);
  }
  return parse_response(res->body);
}

}  // namespace buzzdef::llm
