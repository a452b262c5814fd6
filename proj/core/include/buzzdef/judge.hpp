// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/corpus.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/templates.hpp"

namespace buzzdef::judge {

struct JudgeVerdict {
  std::string word;
  int sa = 0;
  std::string sa_reason;
  int sc = 0;
  std::string sc_reason;
  std::string judge_backbone;
  int calls = 0;  // logical judge calls, including parse and range re-queries
};

Json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const Json& j);

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scores stayed outside 1..5 after the single re-query. The verdict is
/// excluded, never clamped.
class OutOfRangeError : public JudgeError {
 public:
  using JudgeError::JudgeError;
};

struct JudgeOptions {
  std::string judge_backbone;
  std::optional<std::filesystem::path> template_dir;
  double temperature = llm::kDefaultTemperature;
  std::optional<std::int64_t> seed = llm::kDefaultSeed;
  int max_output = 1024;
};

/// Appended to the judge prompt when the first reply had a score outside 1..5.
inline constexpr std::string_view kRangeReminder = "分数必须是1到5之间的整数";

tmpl::Rendered render_judge_prompt(const std::string& predicted, const std::string& gold,
                                   const std::optional<std::filesystem::path>& template_dir = {});

JudgeVerdict judge_definition(const std::string& predicted, const std::string& gold,
                              const std::string& word, llm::Gateway& gateway,
                              const JudgeOptions& opts);

/// The configured judge_backbone, else the backbone with the highest
/// strength (ties go to the smaller id).
std::string default_judge_backbone(const llm::GatewayConfig& cfg);

// Contamination ----------------------------------------------------------

enum class Status { Seen, Unseen };
std::string to_string(Status s);
Status status_from_string(const std::string& s);

enum class ThresholdRule { Min, Mean, SaOnly };
std::string to_string(ThresholdRule r);
ThresholdRule rule_from_string(const std::string& s);

inline constexpr int kDefaultThreshold = 3;

/// unseen iff the combined probe score is below `threshold`.
bool is_unseen(int sa, int sc, ThresholdRule rule, int threshold = kDefaultThreshold);

struct ContaminationTag {
  std::string word;
  std::string backbone_id;
  Status status = Status::Seen;  // automatic status from the scores
  int probe_sa = 0;
  int probe_sc = 0;
  /// Majority reviewer vote: true means the backbone knows the word.
  std::optional<bool> human_override;
  ThresholdRule rule = ThresholdRule::Min;
  std::string probe_definition;
};

/// The override wins when present.
Status effective_status(const ContaminationTag& t);

Json to_json(const ContaminationTag& t);
ContaminationTag tag_from_json(const Json& j);
std::vector<ContaminationTag> load_tags(const std::filesystem::path& path);
void save_tags(const std::filesystem::path& path, const std::vector<ContaminationTag>& tags);

struct ProbeOptions {
  std::string backbone_id;
  JudgeOptions judge;
  ThresholdRule rule = ThresholdRule::Min;
  int threshold = kDefaultThreshold;
  std::optional<std::filesystem::path> template_dir;
};

/// Definition from the word alone on `backbone_id`, judged against gold.
ContaminationTag contamination_probe(const corpus::BuzzwordEntry& entry, llm::Gateway& gateway,
                                     const ProbeOptions& opts);

struct ProbeBatch {
  std::vector<ContaminationTag> tags;
  std::map<std::string, std::string> undetermined;  // word -> diagnostic
};

/// Probes every entry, `workers` at a time. Failures land in `undetermined`.
ProbeBatch probe_corpus(const std::vector<corpus::BuzzwordEntry>& corpus, llm::Gateway& gateway,
                        const ProbeOptions& opts, std::size_t workers = 4);

struct Split {
  std::string backbone_id;
  std::set<std::string> seen;
  std::set<std::string> unseen;
  std::set<std::string> undetermined;
};

/// One Split per backbone present in `tags`. Every corpus word needs exactly
/// one tag per backbone unless listed in `undetermined[backbone]`. Throws
/// JudgeError on missing, duplicate or foreign tags.
std::map<std::string, Split> split_by_contamination(
    const std::vector<ContaminationTag>& tags, const std::vector<corpus::BuzzwordEntry>& corpus,
    const std::map<std::string, std::set<std::string>>& undetermined = {});

/// Throws std::logic_error unless seen, unseen and undetermined are pairwise
/// disjoint and together cover `words`.
void assert_partition(const Split& s, const std::set<std::string>& words);

/// Reads every regular file in `dir` as one reviewer's `word<TAB>vote` list.
std::map<std::string, std::vector<int>> load_override_votes(const std::filesystem::path& dir);

/// Sets human_override to the strict majority of each word's votes. A tie
/// leaves the tag untouched. Returns the number of tags changed.
std::size_t apply_overrides(std::vector<ContaminationTag>& tags,
                            const std::map<std::string, std::vector<int>>& votes);

/// Tab-separated sheet for the human review step, one row per tag.
void write_review_worksheet(const std::filesystem::path& path,
                            const std::vector<ContaminationTag>& tags,
                            const std::vector<corpus::BuzzwordEntry>& corpus);

}  // namespace buzzdef::judge
