// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/jsonl.hpp"

namespace buzzdef::corpus {

/// One buzzword row: the word, its scraped description, the gold definition
/// and its UGC example sentences in file order.
struct BuzzwordEntry {
  std::string word;
  std::string description;
  std::string definition;
  std::vector<std::string> examples;

  bool operator==(const BuzzwordEntry&) const = default;
};

struct CorpusStats {
  std::size_t n_buzzwords = 0;
  std::size_t n_examples = 0;
  double avg_examples_per_word = 0.0;
  double avg_len_description = 0.0;
  double avg_len_definition = 0.0;
  double avg_len_examples = 0.0;  // per example, in characters
};

struct Diagnostic {
  std::size_t line = 0;
  std::string word;  // empty when the record could not be parsed
  std::string message;
};

struct LoadResult {
  std::vector<BuzzwordEntry> entries;
  std::vector<Diagnostic> rejected;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invariant check; returns the first violation, or nothing when valid.
std::optional<std::string> validate(const BuzzwordEntry& entry);

BuzzwordEntry entry_from_json(const Json& j);
Json entry_to_json(const BuzzwordEntry& e);

/// Reads a line-delimited corpus. Malformed records and invariant violations
/// are rejected with a per-line diagnostic; an unreadable file or a repeated
/// word throws CorpusError.
LoadResult load_corpus(const std::filesystem::path& path);

void save_corpus(const std::filesystem::path& path, const std::vector<BuzzwordEntry>& entries);

CorpusStats compute_stats(const std::vector<BuzzwordEntry>& corpus);

const BuzzwordEntry* find_entry(const std::vector<BuzzwordEntry>& corpus, std::string_view word);

/// Digest over the canonical serialization; two runs share a corpus iff
/// their corpus ids match.
std::string corpus_id(const std::vector<BuzzwordEntry>& corpus);

struct RemovedExample {
  std::size_t index = 0;  // position in the original entry
  std::string sentence;
  std::string pattern;  // the instantiated pattern that matched
};

struct FilterResult {
  BuzzwordEntry entry;
  std::vector<RemovedExample> removed;
  bool valid = true;  // false when no example survived
};

/// Drops examples containing any pattern after substituting [BUZZWORD].
FilterResult filter_definitional(const BuzzwordEntry& entry,
                                 const std::vector<std::string>& patterns);

std::vector<std::string> default_definitional_patterns();

}  // namespace buzzdef::corpus
