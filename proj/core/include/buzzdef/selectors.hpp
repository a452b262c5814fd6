// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/corpus.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/segmenter.hpp"

namespace buzzdef::select {

enum class Strategy { All, Random, Gdex, Waus };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SelectionConfig {
  Strategy strategy = Strategy::All;
  std::size_t k = 10;  // ignored for All
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument when k is 0 for a ranked or random strategy.
void validate(const SelectionConfig& cfg);

struct SelectionScore {
  std::size_t sentence_index = 0;
  double total = 0.0;
  std::map<std::string, double> breakdown;
};

struct GdexWeights {
  double length_penalty = -1.0;
  double pronoun_penalty = -0.5;  // per occurrence
  double boundary_penalty = -0.5;
  double common_ratio = -1.0;  // multiplies the common-word ratio
  std::size_t min_len = 10;
  std::size_t max_len = 25;
};

struct GdexLexicons {
  seg::Lexicon common_words;
  seg::Lexicon pronouns;
  seg::SegmentMode mode = seg::SegmentMode::LexiconWord;
  GdexWeights weights;

  /// Shipped lexicons, or the files in `dir` where present.
  static GdexLexicons load(const std::optional<std::filesystem::path>& dir = std::nullopt);
};

/// Per-rule breakdown keys: "length", "pronoun", "boundary", "common_ratio".
/// Occurrences of `target` are not scanned for pronouns or common words; each
/// counts as one non-common word.
SelectionScore gdex_score(const std::string& sentence, const std::string& target,
                          const GdexLexicons& lex);

/// Learned scorer seam, implemented by the WAUS head.
class SentenceScorer {
 public:
  virtual ~SentenceScorer() = default;
  virtual std::vector<double> score(const std::vector<std::string>& sentences,
                                    const std::string& target) = 0;
  /// Stable identity folded into selector fingerprints.
  virtual std::string fingerprint() const = 0;
};

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Selection {
  std::vector<std::size_t> indices;  // into entry.examples, in rank order
  std::vector<std::string> sentences;
  std::vector<SelectionScore> scores;  // for every example (ranked strategies only)
  bool short_of_k = false;             // fewer examples than k existed
};

Selection select(const corpus::BuzzwordEntry& entry, const SelectionConfig& cfg,
                 const GdexLexicons& lex, SentenceScorer* scorer = nullptr);

/// Indices sorted by descending total, ties by ascending index.
std::vector<std::size_t> rank_by_score(const std::vector<SelectionScore>& scores);

/// Digest of the selector configuration (and scorer identity for Waus).
std::string selector_fingerprint(const SelectionConfig& cfg, const SentenceScorer* scorer);

Json to_json(const SelectionConfig& cfg);
SelectionConfig selection_config_from_json(const Json& j);
Json selection_to_json(const std::string& word, const Selection& s);

}  // namespace buzzdef::select
