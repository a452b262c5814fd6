// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/corpus.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/templates.hpp"

namespace buzzdef::gen {

enum class AspectId { IU, CA, LS, SCI, WC, PS };

struct AspectSpec {
  AspectId id;
  std::string code;  // "IU", ...
  std::string name_zh;
  std::string explanation_zh;
};

/// The six aspects in canonical order IU, CA, LS, SCI, WC, PS.
const std::vector<AspectSpec>& canonical_aspects();
const AspectSpec& aspect(AspectId id);
AspectId aspect_from_code(const std::string& code);
std::vector<AspectId> all_aspect_ids();
/// Parses "IU,CA" style lists; result is deduplicated and canonically ordered.
std::vector<AspectId> parse_aspect_list(const std::string& csv);

struct AspectCandidate {
  std::string definition;
  std::string reason;
  bool operator==(const AspectCandidate&) const = default;
};

struct GeneratedDefinition {
  std::string word;
  std::string method;
  std::string backbone_id;
  std::string selector_fingerprint;
  std::string definition;
  std::string reason;
  std::optional<std::map<std::string, AspectCandidate>> aspect_trace;  // keyed by aspect code
  int call_count = 0;
  std::size_t examples_used = 0;
  std::size_t examples_dropped = 0;
  bool seed_sent = false;
  std::vector<std::string> warnings;
};

Json to_json(const GeneratedDefinition& g);
GeneratedDefinition generated_from_json(const Json& j);

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerationOptions {
  std::string backbone_id;
  std::optional<std::filesystem::path> template_dir;
  std::vector<AspectId> aspects = all_aspect_ids();
  bool ensemble_with_reasons = false;
  bool parallel_aspects = true;
  double temperature = llm::kDefaultTemperature;
  std::optional<std::int64_t> seed = llm::kDefaultSeed;
  int max_output = 1024;
  std::string selector_fingerprint;
  /// Overrides the backbone's prompt budget (in characters) when set.
  std::optional<std::size_t> prompt_char_budget;
};

/// "1. s1\n2. s2..." as substituted into [UGC_SENTENCES].
std::string format_ugc(const std::vector<std::string>& examples);

struct TruncatedPrompt {
  std::string prompt;
  tmpl::Rendered rendered;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  bool over_budget = false;  // still too long with a single example
};

/// Renders `tmpl` with `bindings` plus [UGC_SENTENCES], dropping whole
/// trailing examples until the prompt fits `budget` characters. At least one
/// example is always kept.
TruncatedPrompt render_with_budget(const std::string& tmpl, tmpl::Bindings bindings,
                                   const std::vector<std::string>& examples, std::size_t budget);

/// External method hook (subprocess or HTTP) for methods implemented
/// outside this library.
class MethodAdapter {
 public:
  virtual ~MethodAdapter() = default;
  /// Returns {definition, reason}; throws AdapterError on protocol violation.
  virtual AspectCandidate run(const std::string& word, const std::vector<std::string>& examples) = 0;
};

class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& builtin_methods() {
  static const std::vector<std::string> m{"dp_no_ugc", "dp", "cot", "ress"};
  return m;
}

class Generator {
 public:
  Generator(llm::Gateway& gateway, GenerationOptions opts);

  GeneratedDefinition dp_no_ugc(const std::string& word);
  GeneratedDefinition dp(const std::string& word, const std::vector<std::string>& examples);
  GeneratedDefinition cot(const std::string& word, const std::vector<std::string>& examples);
  GeneratedDefinition ress(const std::string& word, const std::vector<std::string>& examples);
  GeneratedDefinition ress(const std::string& word, const std::vector<std::string>& examples,
                           const std::vector<AspectId>& aspects);

  void register_adapter(const std::string& method_id, std::shared_ptr<MethodAdapter> adapter);
  /// Declares a method name that needs an adapter ("focus" by default).
  void declare_external(const std::string& method_id);
  bool is_known(const std::string& method_id) const;

  GeneratedDefinition run_method(const std::string& method_id, const corpus::BuzzwordEntry& entry,
                                 const std::vector<std::string>& selection);

  /// Prompt renderers, exposed for inspection and tests.
  std::string dp_no_ugc_prompt(const std::string& word) const;
  TruncatedPrompt dp_prompt(const std::string& word, const std::vector<std::string>& examples,
                            bool cot) const;
  TruncatedPrompt aspect_prompt(const std::string& word, const std::vector<std::string>& examples,
                                const AspectSpec& a) const;
  TruncatedPrompt ensemble_prompt(const std::string& word, const std::vector<std::string>& examples,
                                  const std::vector<std::pair<AspectId, AspectCandidate>>& candidates) const;

  const GenerationOptions& options() const { return opts_; }

 private:
  llm::LlmRequest request(std::string prompt) const;
  std::size_t budget() const;
  GeneratedDefinition base(const std::string& word, const std::string& method) const;
  GeneratedDefinition from_examples(const std::string& word, const std::vector<std::string>& examples,
                                    bool cot);

  llm::Gateway& gateway_;
  GenerationOptions opts_;
  std::string oneshot_;
  std::map<std::string, std::shared_ptr<MethodAdapter>> adapters_;
  std::vector<std::string> external_;
};

/// [CANDIDATE_DEFINITION] text: one "name：definition" line per candidate,
/// optionally with the aspect's reason appended.
std::string format_candidates(const std::vector<std::pair<AspectId, AspectCandidate>>& candidates,
                              bool with_reasons);

}  // namespace buzzdef::gen
