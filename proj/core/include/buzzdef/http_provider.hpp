// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <chrono>
#include <string>

#include "buzzdef/llm_gateway.hpp"

namespace buzzdef::llm {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

/// Splits an absolute http(s) URL; throws ConfigError otherwise.
UrlParts split_url(const std::string& url);

/// Chat-completion client for OpenAI-compatible endpoints. Sends one user
/// message; the API key is read from the backbone's `auth_env` variable at
/// call time.
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(std::chrono::seconds timeout = std::chrono::seconds(120))
      : timeout_(timeout) {}
  std::string complete(const ProviderCall& call) override;

  static Json request_body(const ProviderCall& call);
  /// Pulls choices[0].message.content out of a response body.
  static std::string parse_response(const std::string& body);

 private:
  std::chrono::seconds timeout_;
};

}  // namespace buzzdef::llm
