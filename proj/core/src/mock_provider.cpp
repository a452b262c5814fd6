// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/mock_provider.hpp"

#include "buzzdef/digest.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::llm {

namespace {

bool retryable_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

// Text between `open` and the next `close` after it, or empty.
std::string between(const std::string& s, std::string_view open, std::string_view close) {
  auto a = s.find(open);
  if (a == std::string::npos) return {};
  a += open.size();
  auto b = s.find(close, a);
  if (b == std::string::npos) return s.substr(a);
  return s.substr(a, b - a);
}

}  // namespace

void MockProvider::add_canned(std::string prompt, std::string text) {
  std::lock_guard lock(mu_);
  canned_[std::move(prompt)] = std::move(text);
}

void MockProvider::set_handler(Handler h) {
  std::lock_guard lock(mu_);
  handler_ = std::move(h);
}

void MockProvider::fail_next(int n, int status) {
  std::lock_guard lock(mu_);
  pending_failures_ = n;
  failure_status_ = status;
}

void MockProvider::fail_when(FaultPredicate pred, int status) {
  std::lock_guard lock(mu_);
  fault_pred_ = std::move(pred);
  fault_status_ = status;
}

std::string MockProvider::complete(const ProviderCall& call) {
  Handler handler;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    prompts_.push_back(call.prompt);
    seeds_.push_back(call.seed);
    if (pending_failures_ > 0) {
      --pending_failures_;
      throw ProviderError("injected failure", failure_status_, retryable_status(failure_status_));
    }
    if (fault_pred_ && fault_pred_(call))
      throw ProviderError("injected permanent failure", fault_status_, false);
    auto it = canned_.find(call.prompt);
    if (it != canned_.end()) return it->second;
    handler = handler_;
  }
  if (handler) return handler(call);
  throw ProviderError("mock: no response for prompt", 404, false);
}

std::vector<std::string> MockProvider::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

std::vector<std::optional<std::int64_t>> MockProvider::seeds() const {
  std::lock_guard lock(mu_);
  return seeds_;
}

void MockProvider::reset_counters() {
  std::lock_guard lock(mu_);
  calls_ = 0;
  prompts_.clear();
  seeds_.clear();
}

std::string EchoProvider::complete(const ProviderCall& call) { return echo_response(call.prompt); }

std::string echo_response(const std::string& prompt) {
  const auto h = stable_hash64(prompt);
  if (text::contains(prompt, "\"准确性\": [INT, WHY]")) {
    const int sa = 1 + static_cast<int>(h % 5);
    const int sc = 1 + static_cast<int>((h >> 8) % 5);
    return dump_line(Json{{"准确性", Json::array({sa, "离线评分"})},
                          {"细节完整性", Json::array({sc, "离线评分"})}});
  }
  if (text::contains(prompt, "'definition': STRING")) {
    const auto word = text::trim(between(prompt, "词语：", "\n"));
    return dump_line(Json{{"word", word}, {"definition", "离线生成的" + word + "释义"}});
  }
  if (text::contains(prompt, "\"例句\": [STRING")) {
    const auto word = between(prompt, "围绕词语", "造");
    Json ex = Json::array();
    for (int i = 0; i < 3; ++i) ex.push_back("关于" + word + "的事情第" + std::to_string(i + 1) + "次被提起");
    return dump_line(Json{{"词语", word}, {"例句", ex}});
  }
  const auto word = between(prompt, "词语", "的");
  auto first = text::trim(between(prompt, "[例句]: ", "\n"));
  if (first.rfind("1. ", 0) == 0) first = first.substr(3);
  return "```json\n" +
         dump_line(Json{{"词语", word},
                        {"定义", "根据例句，“" + first + "”中的用法"},
                        {"原因", "离线回声 " + sha256_hex(prompt).substr(0, 8)}}) +
         "\n```";
}

}  // namespace buzzdef::llm
