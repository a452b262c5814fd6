// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/embedding.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "buzzdef/digest.hpp"
#include "buzzdef/http_provider.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/random.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::embed {

namespace {

Vector to_vector(const Json& arr) {
  if (!arr.is_array()) throw EmbeddingError("vector is not an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw EmbeddingError("vector component is not a number");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

const Json& results_of(const Json& j, std::size_t n_texts) {
  if (!j.is_object() || !j.contains("results") || !j["results"].is_array())
    throw EmbeddingError("embed response lacks a results array");
  const auto& r = j["results"];
  if (r.size() != n_texts)
    throw EmbeddingError("embed response has " + std::to_string(r.size()) + " results for " +
                         std::to_string(n_texts) + " texts");
  return r;
}

Json parse_body(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw EmbeddingError("embed response is not JSON");
  return j;
}

}  // namespace

std::vector<TokenEmbedding> parse_tokens_response(const std::string& body, std::size_t n_texts) {
  const Json j = parse_body(body);
  const auto& results = results_of(j, n_texts);
  std::vector<TokenEmbedding> out;
  out.reserve(n_texts);
  Eigen::Index dim = -1;
  for (const auto& r : results) {
    TokenEmbedding t;
    try {
      for (const auto& tok : r.at("tokens")) t.tokens.push_back(tok.get<std::string>());
      for (const auto& v : r.at("vectors")) t.vectors.push_back(to_vector(v));
      if (r.contains("special_token_mask")) {
        for (const auto& m : r["special_token_mask"]) t.special_mask.push_back(m.get<bool>());
      } else {
        t.special_mask.assign(t.tokens.size(), false);
      }
      t.truncated = r.value("truncated", false);
    } catch (const Json::exception& e) {
      throw EmbeddingError(std::string("malformed tokens result: ") + e.what());
    }
    if (t.vectors.size() != t.tokens.size() || t.special_mask.size() != t.tokens.size())
      throw EmbeddingError("token, vector and mask counts differ");
    for (const auto& v : t.vectors) {
      if (dim < 0) dim = v.size();
      if (v.size() != dim) throw EmbeddingError("inconsistent vector dimensions");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Vector> parse_pooled_response(const std::string& body, std::size_t n_texts) {
  const Json j = parse_body(body);
  const auto& results = results_of(j, n_texts);
  std::vector<Vector> out;
  out.reserve(n_texts);
  for (const auto& r : results) {
    if (r.contains("vector")) {
      out.push_back(to_vector(r["vector"]));
    } else if (r.contains("vectors") && r["vectors"].is_array() && r["vectors"].size() == 1) {
      out.push_back(to_vector(r["vectors"][0]));
    } else {
      throw EmbeddingError("pooled result lacks a vector");
    }
    if (out.back().size() != out.front().size())
      throw EmbeddingError("inconsistent vector dimensions");
  }
  return out;
}

ProviderHealth parse_health_response(const std::string& body) {
  const Json j = parse_body(body);
  ProviderHealth h;
  if (j.contains("model_digest") && j["model_digest"].is_string()) {
    h.model_digest = j["model_digest"].get<std::string>();
  } else if (j.contains("model") && j["model"].is_string()) {
    h.model_digest = j["model"].get<std::string>();
  } else {
    throw EmbeddingError("health response lacks a model digest");
  }
  if (!j.contains("dim") || !j["dim"].is_number_unsigned())
    throw EmbeddingError("health response lacks dim");
  h.dim = j["dim"].get<std::size_t>();
  return h;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::chrono::seconds timeout,
                                             std::size_t batch_size)
    : base_url_(std::move(base_url)), timeout_(timeout), batch_size_(batch_size ? batch_size : 1) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpEmbeddingProvider::post_embed(const std::vector<std::string>& texts,
                                              const char* mode) {
  const auto url = llm::split_url(base_url_ + "/embed");
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  const Json body{{"texts", texts}, {"mode", mode}};
  auto res = cli.Post(url.path, body.dump(), "application/json");
  if (!res)
    throw EmbeddingError("embedding provider unreachable at " + base_url_ + ": " +
                         httplib::to_string(res.error()));
  if (res->status != 200)
    throw EmbeddingError("embedding provider returned HTTP " + std::to_string(res->status));
  return res->body;
}

std::vector<Vector> HttpEmbeddingProvider::pooled(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                   texts.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(texts.size(), i + batch_size_)));
    auto part = parse_pooled_response(post_embed(batch, "pooled"), batch.size());
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

std::vector<TokenEmbedding> HttpEmbeddingProvider::tokens(const std::vector<std::string>& texts) {
  std::vector<TokenEmbedding> out;
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                   texts.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(texts.size(), i + batch_size_)));
    auto part = parse_tokens_response(post_embed(batch, "tokens"), batch.size());
    for (auto& t : part) out.push_back(std::move(t));
  }
  return out;
}

ProviderHealth HttpEmbeddingProvider::health() {
  const auto url = llm::split_url(base_url_ + "/health");
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout_);
  auto res = cli.Get(url.path);
  if (!res) throw EmbeddingError("embedding provider unreachable at " + base_url_);
  if (res->status != 200)
    throw EmbeddingError("health check returned HTTP " + std::to_string(res->status));
  return parse_health_response(res->body);
}

CachingEmbeddingProvider::CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                                   std::optional<std::filesystem::path> dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {}

ProviderHealth CachingEmbeddingProvider::health() { return inner_->health(); }

std::filesystem::path CachingEmbeddingProvider::disk_path(const std::string& text) {
  if (!digest_) digest_ = inner_->health().model_digest;
  const auto key = sha256_hex(*digest_ + '\n' + text);
  return *dir_ / key.substr(0, 2) / (key + ".json");
}

std::vector<Vector> CachingEmbeddingProvider::pooled(const std::vector<std::string>& texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> missing;
  for (const auto& t : texts) {
    if (pooled_.count(t)) continue;
    if (dir_) {
      const auto p = disk_path(t);
      if (std::filesystem::exists(p)) {
        try {
          pooled_.emplace(t, to_vector(Json::parse(read_file(p))));
          continue;
        } catch (const std::exception& e) {
          spdlog::warn("ignoring unreadable embedding cache entry {}: {}", p.string(), e.what());
        }
      }
    }
    if (std::find(missing.begin(), missing.end(), t) == missing.end()) missing.push_back(t);
  }
  if (!missing.empty()) {
    ++inner_calls_;
    auto fresh = inner_->pooled(missing);
    if (fresh.size() != missing.size()) throw EmbeddingError("provider returned wrong count");
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (dir_) {
        try {
          write_file_atomic(disk_path(missing[i]),
                            Json(std::vector<double>(fresh[i].data(),
                                                     fresh[i].data() + fresh[i].size()))
                                .dump());
        } catch (const std::exception& e) {
          spdlog::warn("embedding cache write failed: {}", e.what());
        }
      }
      pooled_.emplace(missing[i], std::move(fresh[i]));
    }
  }
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(pooled_.at(t));
  return out;
}

std::vector<TokenEmbedding> CachingEmbeddingProvider::tokens(const std::vector<std::string>& texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> missing;
  for (const auto& t : texts)
    if (!tokens_.count(t) && std::find(missing.begin(), missing.end(), t) == missing.end())
      missing.push_back(t);
  if (!missing.empty()) {
    ++inner_calls_;
    auto fresh = inner_->tokens(missing);
    if (fresh.size() != missing.size()) throw EmbeddingError("provider returned wrong count");
    for (std::size_t i = 0; i < missing.size(); ++i) tokens_.emplace(missing[i], std::move(fresh[i]));
  }
  std::vector<TokenEmbedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokens_.at(t));
  return out;
}

Vector HashEmbeddingProvider::hash_vector(std::string_view key, std::size_t dim) {
  DeterministicRng rng(stable_hash64(key));
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

std::vector<Vector> HashEmbeddingProvider::pooled(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_vector("pooled:" + t, dim_));
  return out;
}

std::vector<TokenEmbedding> HashEmbeddingProvider::tokens(const std::vector<std::string>& texts) {
  std::vector<TokenEmbedding> out;
  for (const auto& t : texts) {
    TokenEmbedding te;
    for (auto& s : text::split_scalars(t)) {
      if (text::is_whitespace(text::decode_utf8(s).at(0))) continue;
      te.vectors.push_back(hash_vector("token:" + s, dim_));
      te.tokens.push_back(std::move(s));
      te.special_mask.push_back(false);
    }
    out.push_back(std::move(te));
  }
  return out;
}

std::size_t OrthonormalTokenProvider::index_of(const std::string& tok) {
  auto [it, inserted] = index_.emplace(tok, index_.size());
  if (it->second >= dim_) throw EmbeddingError("orthonormal provider ran out of dimensions");
  return it->second;
}

std::vector<Vector> OrthonormalTokenProvider::pooled(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  for (const auto& te : tokens(texts)) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& x : te.vectors) v += x;
    const double n = v.norm();
    if (n > 0) v /= n;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<TokenEmbedding> OrthonormalTokenProvider::tokens(const std::vector<std::string>& texts) {
  std::lock_guard lock(mu_);
  std::vector<TokenEmbedding> out;
  for (const auto& t : texts) {
    TokenEmbedding te;
    for (auto& s : text::split_scalars(t)) {
      if (text::is_whitespace(text::decode_utf8(s).at(0))) continue;
      Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
      v[static_cast<Eigen::Index>(index_of(s))] = 1.0;
      te.vectors.push_back(std::move(v));
      te.tokens.push_back(std::move(s));
      te.special_mask.push_back(false);
    }
    out.push_back(std::move(te));
  }
  return out;
}

}  // namespace buzzdef::embed
