// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/payload.hpp"

#include <charconv>
#include <cmath>
#include <optional>

#include "buzzdef/jsonl.hpp"

namespace buzzdef::payload {

namespace {

constexpr std::string_view kFullColon = "\xEF\xBC\x9A";   // ：
constexpr std::string_view kFullComma = "\xEF\xBC\x8C";   // ，
constexpr std::string_view kLeftQuote = "\xE2\x80\x9C";   // “
constexpr std::string_view kRightQuote = "\xE2\x80\x9D";  // ”

std::string describe(ErrorKind kind, const std::string& key) {
  switch (kind) {
    case ErrorKind::NoRecordFound:
      return "no record found";
    case ErrorKind::MissingKey:
      return "missing key: " + key;
    case ErrorKind::TypeMismatch:
      return "type mismatch for key: " + key;
  }
  return "payload error";
}

bool starts_with_at(std::string_view s, std::size_t i, std::string_view p) {
  return s.size() - i >= p.size() && s.compare(i, p.size(), p) == 0;
}

// Returns the end (exclusive) of the balanced object starting at `open`, or
// nothing. When `single_quotes` is set, '...' also delimits strings.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open, bool single_quotes) {
  int depth = 0;
  char quote = 0;
  bool curly = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (quote || curly) {
      if (c == '\\') {
        ++i;
        continue;
      }
      if (quote && c == quote) quote = 0;
      if (curly && starts_with_at(s, i, kRightQuote)) {
        curly = false;
        i += kRightQuote.size() - 1;
      }
      continue;
    }
    if (c == '"' || (single_quotes && c == '\'')) {
      quote = c;
    } else if (starts_with_at(s, i, kLeftQuote)) {
      curly = true;
      i += kLeftQuote.size() - 1;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return c == '}' ? std::optional<std::size_t>(i + 1) : std::nullopt;
      if (depth < 0) return std::nullopt;
    }
  }
  return std::nullopt;
}

// Rewrites lenient record syntax into strict JSON: single-quoted and curly
// quoted strings, fullwidth colon/comma between tokens, trailing commas.
std::string normalize(std::string_view s, bool single_quotes) {
  std::string out;
  out.reserve(s.size() + 8);
  std::size_t i = 0;
  auto drop_trailing_comma = [&out]() {
    auto j = out.find_last_not_of(" \t\r\n");
    if (j != std::string::npos && out[j] == ',') out.erase(j, 1);
  };
  while (i < s.size()) {
    const char c = s[i];
    if (c == '"') {
      out += c;
      ++i;
      while (i < s.size()) {
        out += s[i];
        if (s[i] == '\\' && i + 1 < s.size()) {
          out += s[++i];
        } else if (s[i] == '"') {
          ++i;
          break;
        }
        ++i;
      }
      continue;
    }
    const bool single = single_quotes && c == '\'';
    const bool curly = starts_with_at(s, i, kLeftQuote);
    if (single || curly) {
      i += single ? 1 : kLeftQuote.size();
      out += '"';
      while (i < s.size()) {
        if (single && s[i] == '\'') {
          ++i;
          break;
        }
        if (curly && starts_with_at(s, i, kRightQuote)) {
          i += kRightQuote.size();
          break;
        }
        if (s[i] == '\\' && i + 1 < s.size()) {
          if (s[i + 1] == '\'') {
            out += '\'';
          } else {
            out += s[i];
            out += s[i + 1];
          }
          i += 2;
          continue;
        }
        if (s[i] == '"') out += '\\';
        out += s[i++];
      }
      out += '"';
      continue;
    }
    if (starts_with_at(s, i, kFullColon)) {
      out += ':';
      i += kFullColon.size();
      continue;
    }
    if (starts_with_at(s, i, kFullComma)) {
      out += ',';
      i += kFullComma.size();
      continue;
    }
    if (c == '}' || c == ']') drop_trailing_comma();
    out += c;
    ++i;
  }
  return out;
}

std::optional<Json> parse_object(std::string_view raw) {
  Json j = Json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::optional<Json> first_record(std::string_view text) {
  for (bool single : {true, false}) {
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '{') continue;
      auto end = balanced_end(text, i, single);
      if (!end) continue;
      const auto raw = text.substr(i, *end - i);
      if (auto j = parse_object(raw)) return j;
      if (auto j = parse_object(normalize(raw, single))) return j;
    }
  }
  return std::nullopt;
}

std::optional<std::int64_t> as_integer(const Json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;
    return static_cast<std::int64_t>(u);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 1e15) return std::nullopt;
    return static_cast<std::int64_t>(d);
  }
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return out;
  }
  return std::nullopt;
}

Value convert(const Json& v, const FieldSpec& f) {
  switch (f.type) {
    case FieldType::String:
      if (!v.is_string()) throw PayloadError(ErrorKind::TypeMismatch, f.key);
      return v.get<std::string>();
    case FieldType::ScoreWithReason: {
      if (!v.is_array() || v.size() != 2 || !v[1].is_string())
        throw PayloadError(ErrorKind::TypeMismatch, f.key);
      auto n = as_integer(v[0]);
      if (!n) throw PayloadError(ErrorKind::TypeMismatch, f.key);
      return ScoreWithReason{*n, v[1].get<std::string>()};
    }
    case FieldType::StringList: {
      if (!v.is_array()) throw PayloadError(ErrorKind::TypeMismatch, f.key);
      std::vector<std::string> out;
      for (const auto& x : v) {
        if (!x.is_string()) throw PayloadError(ErrorKind::TypeMismatch, f.key);
        out.push_back(x.get<std::string>());
      }
      return out;
    }
  }
  throw PayloadError(ErrorKind::TypeMismatch, f.key);
}

}  // namespace

PayloadError::PayloadError(ErrorKind kind, std::string key)
    : std::runtime_error(describe(kind, key)), kind_(kind), key_(std::move(key)) {}

PayloadSchema generation_schema() {
  return {{{"词语", FieldType::String, false},
           {"定义", FieldType::String, true},
           {"原因", FieldType::String, true}}};
}

PayloadSchema probe_schema() {
  return {{{"word", FieldType::String, false}, {"definition", FieldType::String, true}}};
}

PayloadSchema judge_schema() {
  return {{{"准确性", FieldType::ScoreWithReason, true},
           {"细节完整性", FieldType::ScoreWithReason, true}}};
}

PayloadSchema negatives_schema() {
  return {{{"词语", FieldType::String, false}, {"例句", FieldType::StringList, true}}};
}

const std::string& Payload::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw PayloadError(ErrorKind::MissingKey, key);
  if (auto p = std::get_if<std::string>(&it->second)) return *p;
  throw PayloadError(ErrorKind::TypeMismatch, key);
}

const ScoreWithReason& Payload::score(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw PayloadError(ErrorKind::MissingKey, key);
  if (auto p = std::get_if<ScoreWithReason>(&it->second)) return *p;
  throw PayloadError(ErrorKind::TypeMismatch, key);
}

const std::vector<std::string>& Payload::list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw PayloadError(ErrorKind::MissingKey, key);
  if (auto p = std::get_if<std::vector<std::string>>(&it->second)) return *p;
  throw PayloadError(ErrorKind::TypeMismatch, key);
}

Payload extract_payload(std::string_view text, const PayloadSchema& schema) {
  auto rec = first_record(text);
  if (!rec) throw PayloadError(ErrorKind::NoRecordFound, "");
  Payload out;
  for (const auto& f : schema.fields) {
    auto it = rec->find(f.key);
    if (it == rec->end()) {
      if (f.required) throw PayloadError(ErrorKind::MissingKey, f.key);
      continue;
    }
    out.set(f.key, convert(*it, f));
  }
  return out;
}

std::vector<std::string> candidate_records(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    if (auto end = balanced_end(text, i, true)) out.push_back(normalize(text.substr(i, *end - i), true));
  }
  return out;
}

}  // namespace buzzdef::payload
