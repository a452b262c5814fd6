// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "buzzdef/llm_gateway.hpp"

namespace buzzdef::llm {

/// Test double. Lookup order: fault injection, canned map, handler; with
/// none matching the call fails with a non-retryable 404.
class MockProvider : public ChatProvider {
 public:
  using Handler = std::function<std::string(const ProviderCall&)>;
  using FaultPredicate = std::function<bool(const ProviderCall&)>;

  MockProvider() = default;
  explicit MockProvider(Handler h) : handler_(std::move(h)) {}

  void add_canned(std::string prompt, std::string text);
  void set_handler(Handler h);
  /// The next `n` calls fail with `status` (retryable unless 4xx).
  void fail_next(int n, int status = 503);
  /// Calls matching `pred` fail permanently.
  void fail_when(FaultPredicate pred, int status = 500);

  std::string complete(const ProviderCall& call) override;

  std::size_t calls() const { return calls_.load(); }
  std::vector<std::string> prompts() const;
  std::vector<std::optional<std::int64_t>> seeds() const;
  void reset_counters();

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> canned_;
  Handler handler_;
  int pending_failures_ = 0;
  int failure_status_ = 503;
  FaultPredicate fault_pred_;
  int fault_status_ = 500;
  std::atomic<std::size_t> calls_{0};
  std::vector<std::string> prompts_;
  std::vector<std::optional<std::int64_t>> seeds_;
};

/// Offline responder for dry runs: recognizes each shipped template by its
/// output schema and returns a well-formed record derived from a digest of
/// the prompt. Deterministic and pure.
class EchoProvider : public ChatProvider {
 public:
  std::string complete(const ProviderCall& call) override;
};

std::string echo_response(const std::string& prompt);

}  // namespace buzzdef::llm
