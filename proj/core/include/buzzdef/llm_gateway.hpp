// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "buzzdef/jsonl.hpp"
#include "buzzdef/payload.hpp"

namespace buzzdef::llm {

inline constexpr double kDefaultTemperature = 0.7;
inline constexpr std::int64_t kDefaultSeed = 10086;

struct LlmRequest {
  std::string backbone_id;
  std::string prompt;
  double temperature = kDefaultTemperature;
  std::optional<std::int64_t> seed = kDefaultSeed;
  int max_output = 1024;
};

/// Throws std::invalid_argument on an empty prompt, temperature outside
/// [0, 2] or a non-positive max_output.
void validate(const LlmRequest& req);

struct LlmResponse {
  std::string text;
  bool cached = false;
  std::chrono::milliseconds latency{0};
  int attempt = 1;         // of the original provider call, also for cache hits
  bool seed_sent = false;  // false when the backbone ignores seeds
};

/// Provider failure. `status` is the HTTP status when there is one, 0 for
/// transport errors; `retryable` is false for 4xx other than 408/429.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(std::string msg, int status = 0, bool retryable = true)
      : std::runtime_error(std::move(msg)), status_(status), retryable_(retryable) {}
  int status() const { return status_; }
  bool retryable() const { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackboneConfig {
  std::string id;
  std::string type = "http";  // http | mock | echo
  std::string endpoint;
  std::string model;
  std::string auth_env;  // name of the env var holding the key, never the key
  bool seed_supported = true;
  std::size_t prompt_char_budget = 12000;
  int strength = 0;  // ranks candidates for the default judge
};

/// What a provider actually receives; `seed` is already dropped for
/// backbones that do not support it.
struct ProviderCall {
  const BackboneConfig* backbone = nullptr;
  std::string prompt;
  double temperature = kDefaultTemperature;
  std::optional<std::int64_t> seed;
  int max_output = 1024;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the assistant text or throws ProviderError.
  virtual std::string complete(const ProviderCall& call) = 0;
};

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.5;  // delay *= 1 + jitter * U[0,1)
};

struct GatewayConfig {
  std::map<std::string, BackboneConfig> backbones;
  std::optional<std::filesystem::path> cache_dir;
  RetryPolicy retry;
  std::size_t max_in_flight = 8;
  std::optional<std::string> judge_backbone;
};

/// Parses {"backbones": {id: {...}}, "cache_dir": ..., "max_in_flight": ...}.
GatewayConfig gateway_config_from_json(const Json& j);
GatewayConfig load_gateway_config(const std::filesystem::path& path);

/// Hex digest over (backbone_id, prompt, temperature, seed, max_output).
std::string cache_key(const LlmRequest& req);

struct CacheEntry {
  std::string text;
  int attempt = 1;
};

/// One file per key under `dir/<k0k1>/<key>.json`. Existing entries are never
/// overwritten.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<CacheEntry> get(const std::string& key) const;
  /// Returns false (and logs) when the write fails; callers carry on.
  bool put(const std::string& key, const LlmRequest& req, const CacheEntry& entry);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

class Semaphore {
 public:
  explicit Semaphore(std::size_t n) : count_(n) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t count_;
};

struct GatewayStats {
  std::size_t requests = 0;        // complete() invocations
  std::size_t cache_hits = 0;
  std::size_t provider_calls = 0;  // attempts that reached a provider
  std::size_t failures = 0;        // requests that ended in an error
  std::size_t cache_write_failures = 0;
  std::size_t parse_retries = 0;
};

struct StructuredResult {
  payload::Payload payload;
  LlmResponse response;  // the response that parsed
  int calls = 1;         // logical calls issued, 2 after a parse retry
};

inline constexpr std::string_view kJsonOnlyReminder = "仅返回Json";

class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Overrides the provider built from the backbone's `type`.
  void set_provider(const std::string& backbone_id, std::shared_ptr<ChatProvider> provider);
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

  const BackboneConfig& backbone(const std::string& id) const;
  bool has_backbone(const std::string& id) const;
  const GatewayConfig& config() const { return cfg_; }

  LlmResponse complete(const LlmRequest& req);

  /// complete() then extract_payload(); on a PayloadError re-issues once with
  /// the reminder line appended, then rethrows.
  StructuredResult complete_structured(const LlmRequest& req, const payload::PayloadSchema& schema);

  GatewayStats stats() const;
  void reset_stats();

 private:
  ChatProvider& provider_for(const BackboneConfig& b);
  LlmResponse call_with_retries(const LlmRequest& req, const BackboneConfig& b);

  GatewayConfig cfg_;
  std::optional<ResponseCache> disk_;
  mutable std::mutex mu_;
  std::map<std::string, CacheEntry> memory_;
  std::map<std::string, std::shared_ptr<ChatProvider>> providers_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  Semaphore limiter_;
  GatewayStats stats_;
  std::uint64_t jitter_state_ = 0x5EEDULL;
};

}  // namespace buzzdef::llm
