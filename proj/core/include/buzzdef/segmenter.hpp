// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace buzzdef::seg {

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& words);

  bool contains(std::u32string_view w) const { return words_.count(std::u32string(w)) != 0; }
  bool contains(std::string_view utf8) const;
  std::size_t max_length() const { return max_len_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  std::set<std::u32string> words_;
  std::size_t max_len_ = 0;
};

enum class SegmentMode { LexiconWord, Character };

/// Greedy longest-match against `lex`; ASCII letter/digit runs are kept as
/// one word, anything else falls back to a single character. Whitespace is
/// dropped, punctuation is emitted as its own token.
std::vector<std::string> segment(std::string_view text, const Lexicon& lex,
                                 SegmentMode mode = SegmentMode::LexiconWord);

/// Non-overlapping occurrences of any lexicon entry, scanning left to right
/// and preferring the longest match at each position.
std::size_t count_longest_matches(std::string_view text, const Lexicon& lex);

bool is_punctuation_token(std::string_view tok);

}  // namespace buzzdef::seg
