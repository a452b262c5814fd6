// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/llm_gateway.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <thread>

#include <spdlog/spdlog.h>

#include "buzzdef/digest.hpp"
#include "buzzdef/http_provider.hpp"
#include "buzzdef/mock_provider.hpp"
#include "buzzdef/random.hpp"

namespace buzzdef::llm {

void validate(const LlmRequest& req) {
  if (req.prompt.empty()) throw std::invalid_argument("prompt must be non-empty");
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0))
    throw std::invalid_argument("temperature must be in [0, 2]");
  if (req.max_output <= 0) throw std::invalid_argument("max_output must be positive");
  if (req.backbone_id.empty()) throw std::invalid_argument("backbone_id must be non-empty");
}

GatewayConfig gateway_config_from_json(const Json& j) {
  GatewayConfig cfg;
  if (!j.is_object()) throw ConfigError("provider config must be an object");
  const auto& bb = j.contains("backbones") ? j.at("backbones") : Json::object();
  for (auto it = bb.begin(); it != bb.end(); ++it) {
    BackboneConfig b;
    b.id = it.key();
    const auto& v = it.value();
    b.type = v.value("type", std::string("http"));
    b.endpoint = v.value("endpoint", std::string());
    b.model = v.value("model", b.id);
    b.auth_env = v.value("auth_env", std::string());
    b.seed_supported = v.value("seed_supported", true);
    b.prompt_char_budget = v.value("prompt_char_budget", std::size_t{12000});
    b.strength = v.value("strength", 0);
    if (b.type != "http" && b.type != "mock" && b.type != "echo")
      throw ConfigError("backbone '" + b.id + "': unknown type '" + b.type + "'");
    if (b.type == "http" && b.endpoint.empty())
      throw ConfigError("backbone '" + b.id + "': http backbone needs an endpoint");
    cfg.backbones.emplace(b.id, std::move(b));
  }
  if (j.contains("cache_dir") && j["cache_dir"].is_string())
    cfg.cache_dir = j["cache_dir"].get<std::string>();
  cfg.max_in_flight = j.value("max_in_flight", std::size_t{8});
  if (cfg.max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
  if (j.contains("judge_backbone") && j["judge_backbone"].is_string()) {
    cfg.judge_backbone = j["judge_backbone"].get<std::string>();
    if (!cfg.backbones.count(*cfg.judge_backbone))
      throw ConfigError("judge_backbone '" + *cfg.judge_backbone + "' is not configured");
  }
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    cfg.retry.max_retries = r.value("max_retries", cfg.retry.max_retries);
    cfg.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", 1000));
    cfg.retry.jitter = r.value("jitter", cfg.retry.jitter);
  }
  return cfg;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return gateway_config_from_json(j);
}

std::string cache_key(const LlmRequest& req) {
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", req.temperature);
  Json k = Json::array({req.backbone_id, req.prompt, std::string(temp),
                        req.seed ? Json(*req.seed) : Json(nullptr), req.max_output});
  return sha256_hex(dump_line(k));
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) const {
  const auto p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  try {
    auto j = Json::parse(read_file(p));
    return CacheEntry{j.at("text").get<std::string>(), j.value("attempt", 1)};
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", p.string(), e.what());
    return std::nullopt;
  }
}

bool ResponseCache::put(const std::string& key, const LlmRequest& req, const CacheEntry& entry) {
  const auto p = path_for(key);
  try {
    if (std::filesystem::exists(p)) return true;
    Json j{{"key", key},
           {"backbone_id", req.backbone_id},
           {"temperature", req.temperature},
           {"seed", req.seed ? Json(*req.seed) : Json(nullptr)},
           {"max_output", req.max_output},
           {"prompt", req.prompt},
           {"text", entry.text},
           {"attempt", entry.attempt}};
    write_file_atomic(p, dump_line(j) + "\n");
    return true;
  } catch (const std::exception& e) {
    spdlog::warn("cache write failed for {}: {}", key, e.what());
    return false;
  }
}

void Semaphore::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return count_ > 0; });
  --count_;
}

void Semaphore::release() {
  {
    std::lock_guard lock(mu_);
    ++count_;
  }
  cv_.notify_one();
}

Gateway::Gateway(GatewayConfig cfg)
    : cfg_(std::move(cfg)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      limiter_(cfg_.max_in_flight) {
  if (cfg_.cache_dir) disk_.emplace(*cfg_.cache_dir);
}

Gateway::~Gateway() = default;

void Gateway::set_provider(const std::string& backbone_id, std::shared_ptr<ChatProvider> provider) {
  std::lock_guard lock(mu_);
  providers_[backbone_id] = std::move(provider);
}

void Gateway::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
  std::lock_guard lock(mu_);
  sleeper_ = std::move(sleeper);
}

bool Gateway::has_backbone(const std::string& id) const { return cfg_.backbones.count(id) != 0; }

const BackboneConfig& Gateway::backbone(const std::string& id) const {
  auto it = cfg_.backbones.find(id);
  if (it == cfg_.backbones.end()) throw ConfigError("backbone not configured: " + id);
  return it->second;
}

ChatProvider& Gateway::provider_for(const BackboneConfig& b) {
  std::lock_guard lock(mu_);
  auto it = providers_.find(b.id);
  if (it != providers_.end()) return *it->second;
  std::shared_ptr<ChatProvider> p;
  if (b.type == "http") {
    p = std::make_shared<HttpChatProvider>();
  } else if (b.type == "echo") {
    p = std::make_shared<EchoProvider>();
  } else {
    throw ConfigError("backbone '" + b.id + "' is a mock backbone with no provider attached");
  }
  providers_[b.id] = p;
  return *p;
}

LlmResponse Gateway::call_with_retries(const LlmRequest& req, const BackboneConfig& b) {
  ProviderCall call;
  call.backbone = &b;
  call.prompt = req.prompt;
  call.temperature = req.temperature;
  call.seed = b.seed_supported ? req.seed : std::nullopt;
  call.max_output = req.max_output;
  ChatProvider& provider = provider_for(b);

  const int max_attempts = cfg_.retry.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    std::string text;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      limiter_.acquire();
      struct Release {
        Semaphore& s;
        ~Release() { s.release(); }
      } release{limiter_};
      {
        std::lock_guard lock(mu_);
        ++stats_.provider_calls;
      }
      text = provider.complete(call);
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= max_attempts) {
        throw ProviderError("backbone '" + b.id + "' failed after " + std::to_string(attempt) +
                                " attempt(s): " + e.what(),
                            e.status(), false);
      }
      std::chrono::milliseconds delay;
      std::function<void(std::chrono::milliseconds)> sleeper;
      {
        std::lock_guard lock(mu_);
        jitter_state_ = splitmix64(jitter_state_);
        const double u = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
        const double scale = std::ldexp(1.0, attempt - 1) * (1.0 + cfg_.retry.jitter * u);
        delay = std::chrono::milliseconds(
            static_cast<std::int64_t>(static_cast<double>(cfg_.retry.base_delay.count()) * scale));
        sleeper = sleeper_;
      }
      spdlog::debug("backbone {} attempt {} failed ({}); retrying in {} ms", b.id, attempt,
                    e.what(), delay.count());
      sleeper(delay);
      continue;
    }
    LlmResponse r;
    r.text = std::move(text);
    r.attempt = attempt;
    r.seed_sent = call.seed.has_value();
    r.latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    return r;
  }
}

LlmResponse Gateway::complete(const LlmRequest& req) {
  validate(req);
  const BackboneConfig& b = backbone(req.backbone_id);
  const std::string key = cache_key(req);
  {
    std::lock_guard lock(mu_);
    ++stats_.requests;
    auto it = memory_.find(key);
    if (it != memory_.end()) {
      ++stats_.cache_hits;
      return LlmResponse{it->second.text, true, std::chrono::milliseconds(0), it->second.attempt,
                         b.seed_supported && req.seed.has_value()};
    }
  }
  if (disk_) {
    if (auto hit = disk_->get(key)) {
      std::lock_guard lock(mu_);
      ++stats_.cache_hits;
      memory_.emplace(key, *hit);
      return LlmResponse{hit->text, true, std::chrono::milliseconds(0), hit->attempt,
                         b.seed_supported && req.seed.has_value()};
    }
  }

  LlmResponse r;
  try {
    r = call_with_retries(req, b);
  } catch (...) {
    std::lock_guard lock(mu_);
    ++stats_.failures;
    throw;
  }
  CacheEntry entry{r.text, r.attempt};
  bool wrote = true;
  if (disk_) wrote = disk_->put(key, req, entry);
  std::lock_guard lock(mu_);
  if (!wrote) ++stats_.cache_write_failures;
  memory_.emplace(key, entry);
  return r;
}

StructuredResult Gateway::complete_structured(const LlmRequest& req,
                                              const payload::PayloadSchema& schema) {
  LlmResponse first = complete(req);
  try {
    return StructuredResult{payload::extract_payload(first.text, schema), first, 1};
  } catch (const payload::PayloadError& e) {
    spdlog::debug("payload extraction failed on {} ({}); re-asking once", req.backbone_id,
                  e.what());
  }
  {
    std::lock_guard lock(mu_);
    ++stats_.parse_retries;
  }
  LlmRequest retry = req;
  retry.prompt += "\n";
  retry.prompt += kJsonOnlyReminder;
  LlmResponse second = complete(retry);
  return StructuredResult{payload::extract_payload(second.text, schema), second, 2};
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void Gateway::reset_stats() {
  std::lock_guard lock(mu_);
  stats_ = GatewayStats{};
}

}  // namespace buzzdef::llm
