// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "buzzdef/embedding.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/selectors.hpp"
#include "buzzdef/waus_head.hpp"

namespace buzzdef::waus {

inline constexpr const char* kDefaultMask = "[MASK]";

/// Replaces every occurrence of `target` with one `mask_token`, repeating
/// until none is left (replacements can splice a new occurrence together).
/// Throws std::invalid_argument if target is absent or empty, or if the mask
/// itself contains the target.
std::string mask_target(const std::string& sentence, const std::string& target,
                        const std::string& mask_token = kDefaultMask);

enum class Label { Positive, Negative };
enum class Source { Dictionary, GeneratedNegative };

struct WausExample {
  std::string sentence;
  std::string target;
  Label label = Label::Positive;
  Source source = Source::Dictionary;
  bool operator==(const WausExample&) const = default;
};

Json to_json(const WausExample& e);
WausExample example_from_json(const Json& j);
std::vector<WausExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::filesystem::path& path, const std::vector<WausExample>& xs);

/// Masks and embeds every example once, then trains. Embedding dimension
/// must match cfg.dims.input.
TrainResult train_on_examples(const std::vector<WausExample>& data, const TrainConfig& cfg,
                              embed::EmbeddingProvider& embed,
                              const std::vector<WausExample>& validation = {},
                              const std::string& mask_token = kDefaultMask);

/// Column matrix of masked-sentence vectors plus 0/1 labels.
std::pair<Matrix, Vector> embed_examples(const std::vector<WausExample>& data,
                                         embed::EmbeddingProvider& embed,
                                         std::size_t expected_dim,
                                         const std::string& mask_token = kDefaultMask);

class WausScorer : public select::SentenceScorer {
 public:
  WausScorer(WausHead head, std::shared_ptr<embed::EmbeddingProvider> embed,
             std::string mask_token = kDefaultMask);
  std::vector<double> score(const std::vector<std::string>& sentences,
                            const std::string& target) override;
  double score_one(const std::string& sentence, const std::string& target);
  std::string fingerprint() const override;
  const WausHead& head() const { return head_; }

 private:
  WausHead head_;
  std::shared_ptr<embed::EmbeddingProvider> embed_;
  std::string mask_token_;
};

struct DictionaryPair {
  std::string word;
  std::string example;
};

std::vector<DictionaryPair> load_dictionary_pairs(const std::filesystem::path& path);

struct WorksheetRow {
  std::string word;
  std::string sentence;
  double p_positive = 0.0;  // current head's confidence; 0.5 without a head
};

struct TrainingSetOptions {
  std::string backbone_id;
  std::size_t negatives_per_word = 3;
  std::size_t review_budget = 50;
  std::set<std::string> excluded_words;  // benchmark corpus words
  std::optional<std::filesystem::path> template_dir;
};

struct TrainingSet {
  std::vector<WausExample> examples;  // positives first, then negatives
  std::vector<WorksheetRow> worksheet;
  std::vector<std::string> warnings;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t duplicates_dropped = 0;
};

/// Positives from dictionary pairs, negatives generated per word through the
/// gateway. Throws if a word is in `excluded_words` or the input is empty.
/// `current` orders the review worksheet by descending p(positive).
TrainingSet build_training_set(const std::vector<DictionaryPair>& pairs, llm::Gateway& gateway,
                               const TrainingSetOptions& opts, WausScorer* current = nullptr);

std::string render_negative_prompt(const std::string& word, std::size_t count,
                                   const std::optional<std::filesystem::path>& template_dir);

}  // namespace buzzdef::waus
