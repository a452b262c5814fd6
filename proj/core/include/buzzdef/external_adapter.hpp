// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "buzzdef/generation.hpp"
#include "buzzdef/jsonl.hpp"

namespace buzzdef::gen {

/// Request line sent to an adapter: {"word": ..., "examples": [...]}.
Json adapter_request(const std::string& word, const std::vector<std::string>& examples);
/// Validates an adapter reply: an object with a non-empty string
/// "definition" and an optional string "reason".
AspectCandidate parse_adapter_reply(const std::string& body);

/// Runs `argv` once per buzzword, writes one request line to its stdin and
/// reads one reply line from its stdout.
class SubprocessAdapter : public MethodAdapter {
 public:
  explicit SubprocessAdapter(std::vector<std::string> argv,
                             std::chrono::seconds timeout = std::chrono::seconds(600));
  AspectCandidate run(const std::string& word, const std::vector<std::string>& examples) override;

 private:
  std::vector<std::string> argv_;
  std::chrono::seconds timeout_;
};

/// POSTs the request record to `url` and expects the reply record back.
class HttpAdapter : public MethodAdapter {
 public:
  explicit HttpAdapter(std::string url, std::chrono::seconds timeout = std::chrono::seconds(600));
  AspectCandidate run(const std::string& word, const std::vector<std::string>& examples) override;

 private:
  std::string url_;
  std::chrono::seconds timeout_;
};

/// {"focus": {"type": "subprocess", "argv": [...]}} or
/// {"focus": {"type": "http", "url": "..."}}.
std::map<std::string, std::shared_ptr<MethodAdapter>> adapters_from_json(const Json& j);

}  // namespace buzzdef::gen
