// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/agreement.hpp"
#include "buzzdef/jsonl.hpp"

namespace buzzdef::human {

enum class Dimension { SA, SC };
enum class Choice { A, B, Tie };
enum class Outcome { WinA, WinB, Tie };

std::string to_string(Dimension d);
std::string to_string(Choice c);
std::string to_string(Outcome o);
Dimension dimension_from_string(const std::string& s);
Choice choice_from_string(const std::string& s);

struct Side {
  std::string definition;
  std::string source;  // method label, server-side only
};

struct ComparisonItem {
  std::string item_id;
  std::string word;
  std::string gold;
  Side side_a;
  Side side_b;
  Dimension dimension = Dimension::SA;
  std::uint64_t side_assignment_seed = 0;
};

/// Full record including the hidden sources, for the event log.
Json to_json(const ComparisonItem& item);
ComparisonItem item_from_json(const Json& j);
/// What annotators receive. Never carries a source label.
Json to_client_json(const ComparisonItem& item);

struct SessionSpec {
  std::string session_id;
  std::string method_a;
  std::string method_b;
  std::map<std::string, std::string> definitions_a;  // word -> definition
  std::map<std::string, std::string> definitions_b;
  std::map<std::string, std::string> gold;
  std::size_t sample = 100;
  std::uint64_t seed = 0;
  std::vector<Dimension> dimensions{Dimension::SA, Dimension::SC};
  std::vector<std::string> annotators;
};

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded sample of the shared words, one item per (word, dimension). Side A
/// goes to method_a on a seeded balanced half of the items.
std::vector<ComparisonItem> create_items(const SessionSpec& spec);

struct Verdict {
  std::string item_id;
  std::string annotator_id;
  Choice choice = Choice::Tie;
  int round = 1;  // 2 is the discussion round
  std::string timestamp;
};

Json to_json(const Verdict& v);
Verdict verdict_from_json(const Json& j);

enum class RejectReason { UnknownItem, UnknownAnnotator, Duplicate, Closed, RoundNotOpen, Final };
std::string to_string(RejectReason r);

class VerdictRejected : public std::runtime_error {
 public:
  VerdictRejected(RejectReason reason, const std::string& msg)
      : std::runtime_error(msg), reason_(reason) {}
  RejectReason reason() const { return reason_; }

 private:
  RejectReason reason_;
};

/// Unanimous non-tie choice wins, anything else is a Tie. Throws
/// SessionError on an empty vote set.
Outcome resolve_consensus(const std::vector<Choice>& votes);

struct WinRate {
  double win = 0.0;
  double lose = 0.0;
  double tie = 0.0;
  std::size_t n = 0;
};

struct ResolvedItem {
  Outcome outcome = Outcome::Tie;
  std::string source_a;
  std::string source_b;
};

/// Fractions over items from `method`'s side. Throws on an empty set or an
/// item where `method` is on neither side.
WinRate win_rate(const std::vector<ResolvedItem>& outcomes, const std::string& method);

struct NextItem {
  std::optional<ComparisonItem> item;
  int round = 1;
  std::size_t done = 0;   // round-1 verdicts by this annotator
  std::size_t total = 0;  // items in the session
};

/// One pairwise session backed by an append-only event log. Thread-safe.
class Session {
 public:
  /// Writes the header record; refuses to overwrite an existing log.
  static std::unique_ptr<Session> create(const SessionSpec& spec, const std::filesystem::path& log);
  /// Rebuilds state by replaying the log.
  static std::unique_ptr<Session> open(const std::filesystem::path& log);

  const std::string& id() const { return id_; }
  const std::vector<ComparisonItem>& items() const { return items_; }
  const std::vector<std::string>& annotators() const { return annotators_; }
  bool closed() const;

  /// Validates and persists one verdict. Throws VerdictRejected.
  void record_verdict(Verdict v);
  void close();

  NextItem next_item(const std::string& annotator) const;

  /// nullopt until round 1 is complete for the item. A split round 1 is a
  /// Tie unless a complete discussion round resolves it.
  std::optional<Outcome> consensus(const std::string& item_id) const;

  /// Win rates per dimension, round-1 agreement, progress.
  Json report() const;

 private:
  Session() = default;
  void apply(const Verdict& v);
  void check(const Verdict& v) const;
  bool round_complete(const std::string& item_id, int round) const;
  std::optional<Outcome> consensus_locked(const std::string& item_id) const;

  mutable std::mutex mu_;
  std::filesystem::path log_;
  std::string id_;
  std::string method_a_;
  std::string method_b_;
  std::vector<ComparisonItem> items_;
  std::map<std::string, std::size_t> item_index_;
  std::vector<std::string> annotators_;
  // (item, round) -> annotator -> choice
  std::map<std::pair<std::string, int>, std::map<std::string, Choice>> votes_;
  bool closed_ = false;
};

}  // namespace buzzdef::human
