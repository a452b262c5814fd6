// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace buzzdef::payload {

enum class FieldType {
  String,           // "定义": "..."
  ScoreWithReason,  // "准确性": [INT, WHY]
  StringList,       // "例句": ["...", "..."]
};

struct FieldSpec {
  std::string key;
  FieldType type = FieldType::String;
  bool required = true;
};

struct PayloadSchema {
  std::vector<FieldSpec> fields;
};

/// 词语/定义/原因, as requested by the generation templates.
PayloadSchema generation_schema();
/// word/definition, as requested by the no-UGC probe template.
PayloadSchema probe_schema();
/// 准确性/细节完整性 score pairs.
PayloadSchema judge_schema();
/// 词语/例句 for generated WAUS negatives.
PayloadSchema negatives_schema();

enum class ErrorKind { NoRecordFound, MissingKey, TypeMismatch };

class PayloadError : public std::runtime_error {
 public:
  PayloadError(ErrorKind kind, std::string key);
  ErrorKind kind() const { return kind_; }
  const std::string& key() const { return key_; }

 private:
  ErrorKind kind_;
  std::string key_;
};

struct ScoreWithReason {
  std::int64_t score = 0;
  std::string reason;
  bool operator==(const ScoreWithReason&) const = default;
};

using Value = std::variant<std::string, ScoreWithReason, std::vector<std::string>>;

class Payload {
 public:
  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  const ScoreWithReason& score(const std::string& key) const;
  const std::vector<std::string>& list(const std::string& key) const;
  const std::map<std::string, Value>& values() const { return values_; }

 private:
  std::map<std::string, Value> values_;
};

/// Finds the first balanced, well-formed object in free text (prose, code
/// fences, single-quoted or fullwidth-punctuated records are tolerated) and
/// checks it against the schema. Never throws anything but PayloadError.
Payload extract_payload(std::string_view text, const PayloadSchema& schema);

/// The raw object text the extractor would parse, after normalization.
/// Exposed for diagnostics and tests.
std::vector<std::string> candidate_records(std::string_view text);

}  // namespace buzzdef::payload
