// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace buzzdef::embed {

using Vector = Eigen::VectorXd;

struct TokenEmbedding {
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;     // one per token
  std::vector<bool> special_mask;  // true for [CLS]/[SEP]/padding
  bool truncated = false;
};

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProviderHealth {
  std::string model_digest;
  std::size_t dim = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Sentence-level vector per text.
  virtual std::vector<Vector> pooled(const std::vector<std::string>& texts) = 0;
  /// Per-token vectors under the provider's own tokenization.
  virtual std::vector<TokenEmbedding> tokens(const std::vector<std::string>& texts) = 0;
  virtual ProviderHealth health() = 0;

  Vector pooled_one(const std::string& text) { return pooled({text}).at(0); }
  TokenEmbedding tokens_one(const std::string& text) { return tokens({text}).at(0); }
};

/// Client for the embedding sidecar: POST /embed {texts, mode} and GET /health.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string base_url,
                                 std::chrono::seconds timeout = std::chrono::seconds(60),
                                 std::size_t batch_size = 32);
  std::vector<Vector> pooled(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbedding> tokens(const std::vector<std::string>& texts) override;
  ProviderHealth health() override;

 private:
  std::string post_embed(const std::vector<std::string>& texts, const char* mode);
  std::string base_url_;
  std::chrono::seconds timeout_;
  std::size_t batch_size_;
};

/// Response decoding, separated from transport so it can be tested directly.
/// Checks that token, vector and mask counts align and dimensions agree.
std::vector<TokenEmbedding> parse_tokens_response(const std::string& body, std::size_t n_texts);
std::vector<Vector> parse_pooled_response(const std::string& body, std::size_t n_texts);
ProviderHealth parse_health_response(const std::string& body);

/// Memoizes per text; optionally persists pooled vectors to `dir` so frozen
/// encoder outputs are computed once.
class CachingEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                    std::optional<std::filesystem::path> dir = std::nullopt);
  std::vector<Vector> pooled(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbedding> tokens(const std::vector<std::string>& texts) override;
  ProviderHealth health() override;
  std::size_t inner_calls() const { return inner_calls_; }

 private:
  std::filesystem::path disk_path(const std::string& text);
  std::shared_ptr<EmbeddingProvider> inner_;
  std::optional<std::filesystem::path> dir_;
  std::optional<std::string> digest_;
  std::mutex mu_;
  std::map<std::string, Vector> pooled_;
  std::map<std::string, TokenEmbedding> tokens_;
  std::size_t inner_calls_ = 0;
};

/// Deterministic pseudo-random unit vectors keyed by text (pooled) or by
/// character (tokens). For dry runs without the sidecar.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 768) : dim_(dim) {}
  std::vector<Vector> pooled(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbedding> tokens(const std::vector<std::string>& texts) override;
  ProviderHealth health() override { return {"hash-v1", dim_}; }
  static Vector hash_vector(std::string_view key, std::size_t dim);

 private:
  std::size_t dim_;
};

/// Character tokens, each distinct character mapped to its own basis vector
/// in first-seen order. Cosine is 1 for equal tokens and 0 otherwise.
class OrthonormalTokenProvider : public EmbeddingProvider {
 public:
  explicit OrthonormalTokenProvider(std::size_t dim = 512) : dim_(dim) {}
  std::vector<Vector> pooled(const std::vector<std::string>& texts) override;
  std::vector<TokenEmbedding> tokens(const std::vector<std::string>& texts) override;
  ProviderHealth health() override { return {"orthonormal-v1", dim_}; }

 private:
  std::size_t index_of(const std::string& tok);
  std::size_t dim_;
  std::mutex mu_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace buzzdef::embed
