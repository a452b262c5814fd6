// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/segmenter.hpp"

#include <algorithm>

#include "buzzdef/text.hpp"

namespace buzzdef::seg {

Lexicon::Lexicon(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    auto u = text::decode_utf8(w);
    if (u.empty()) continue;
    max_len_ = std::max(max_len_, u.size());
    words_.insert(std::move(u));
  }
}

bool Lexicon::contains(std::string_view utf8) const { return contains(text::decode_utf8(utf8)); }

std::vector<std::string> segment(std::string_view text_in, const Lexicon& lex, SegmentMode mode) {
  const auto u = text::decode_utf8(text_in);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < u.size()) {
    if (text::is_whitespace(u[i])) {
      ++i;
      continue;
    }
    if (mode == SegmentMode::Character) {
      out.push_back(text::encode_utf8(u[i]));
      ++i;
      continue;
    }
    std::size_t len = 0;
    const std::size_t cap = std::min(lex.max_length(), u.size() - i);
    for (std::size_t l = cap; l >= 1; --l) {
      if (lex.contains(std::u32string_view(u).substr(i, l))) {
        len = l;
        break;
      }
    }
    if (len == 0 && text::is_ascii_alnum(u[i])) {
      len = 1;
      while (i + len < u.size() && text::is_ascii_alnum(u[i + len])) ++len;
    }
    if (len == 0) len = 1;
    out.push_back(text::encode_utf8(std::u32string_view(u).substr(i, len)));
    i += len;
  }
  return out;
}

std::size_t count_longest_matches(std::string_view text_in, const Lexicon& lex) {
  const auto u = text::decode_utf8(text_in);
  std::size_t n = 0, i = 0;
  while (i < u.size()) {
    std::size_t len = 0;
    const std::size_t cap = std::min(lex.max_length(), u.size() - i);
    for (std::size_t l = cap; l >= 1; --l) {
      if (lex.contains(std::u32string_view(u).substr(i, l))) {
        len = l;
        break;
      }
    }
    if (len) {
      ++n;
      i += len;
    } else {
      ++i;
    }
  }
  return n;
}

bool is_punctuation_token(std::string_view tok) {
  const auto u = text::decode_utf8(tok);
  return !u.empty() && std::all_of(u.begin(), u.end(), [](char32_t c) { return text::is_punctuation(c); });
}

}  // namespace buzzdef::seg
