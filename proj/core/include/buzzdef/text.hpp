// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace buzzdef::text {

// UTF-8 helpers. All lengths in this project are counted in Unicode scalar
// values; malformed bytes decode to U+FFFD one byte at a time.

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::string encode_utf8(char32_t cp);

std::size_t scalar_length(std::string_view s);

// Splits into one string per scalar value.
std::vector<std::string> split_scalars(std::string_view s);

bool is_whitespace(char32_t cp);
bool is_digit(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_ascii_alnum(char32_t cp);

std::string trim(std::string_view s);

// Number of non-overlapping occurrences of needle (left to right).
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

bool contains(std::string_view haystack, std::string_view needle);

// Reads a one-entry-per-line list file; blank lines and lines starting with
// '#' are skipped, entries are trimmed.
std::vector<std::string> read_list_file(const std::string& path);
std::vector<std::string> parse_list(std::string_view content);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace buzzdef::text
