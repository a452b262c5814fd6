// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/corpus.hpp"
#include "buzzdef/embedding.hpp"
#include "buzzdef/generation.hpp"
#include "buzzdef/judge.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/metrics.hpp"
#include "buzzdef/selectors.hpp"

namespace buzzdef::bench {

class BenchmarkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricFlags {
  bool bertscore = false;
  bool judge = true;
};

struct ExperimentConfig {
  std::filesystem::path corpus_path;
  std::vector<std::string> methods;
  std::vector<std::string> backbones;
  select::SelectionConfig selector;
  std::string judge_backbone;  // empty: the gateway default
  MetricFlags metrics;
  std::vector<gen::AspectId> aspects = gen::all_aspect_ids();
  bool ensemble_with_reasons = false;
  metrics::Scheme scheme = metrics::Scheme::Char;
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 0;
  double temperature = llm::kDefaultTemperature;
  std::optional<std::int64_t> llm_seed = llm::kDefaultSeed;
  std::size_t workers = 4;
  std::optional<std::filesystem::path> template_dir;

  // Environment wiring, consumed by the CLI. Not part of any fingerprint.
  std::optional<std::filesystem::path> gateway_config;
  std::optional<std::filesystem::path> tags_path;
  std::optional<std::string> embedding_url;
  std::optional<std::filesystem::path> embedding_cache;
  std::optional<std::filesystem::path> waus_head;
  std::optional<std::filesystem::path> gdex_dir;
  std::optional<std::filesystem::path> lexicon_path;
  std::optional<std::filesystem::path> adapters;
};

/// Relative paths resolve against `base_dir`.
ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
Json to_json(const ExperimentConfig& cfg);
/// Experiment-defining fields only, with lists sorted. Output location,
/// worker count and environment wiring are left out.
Json normalized(const ExperimentConfig& cfg);
std::string config_fingerprint(const ExperimentConfig& cfg);

struct Row {
  std::string word;
  std::vector<std::size_t> selection;
  bool short_of_k = false;
  std::optional<gen::GeneratedDefinition> generated;
  std::optional<metrics::PairMetrics> metrics;
  std::optional<judge::JudgeVerdict> verdict;
  std::string split;  // seen | unseen | undetermined, empty without tags
  std::vector<std::string> errors;
};

Json to_json(const Row& r);
Row row_from_json(const Json& j);

struct Aggregate {
  std::size_t n_rows = 0;
  std::size_t n_generated = 0;  // denominator of bleu and rouge_l
  double bleu = 0.0;
  double rouge_l = 0.0;
  std::size_t n_bertscore = 0;
  std::optional<double> bertscore;
  std::size_t n_judged = 0;  // denominator of sa_mean and sc_mean
  std::optional<double> sa_mean;
  std::optional<double> sc_mean;
};

/// Fold over rows, restricted to one contamination split when given.
Aggregate aggregate(const std::vector<Row>& rows, const std::string* split = nullptr);
Json to_json(const Aggregate& a);
Aggregate aggregate_from_json(const Json& j);

struct RunRecord {
  std::string fingerprint;
  std::string corpus_id;
  std::string method;
  std::string backbone;
  Json selector;
  std::string selector_fingerprint;
  std::vector<std::string> aspects;  // ress only
  std::string judge_backbone;
  std::vector<Row> rows;  // sorted by word
  Aggregate overall;
  std::optional<Aggregate> seen;
  std::optional<Aggregate> unseen;
  std::string contamination_rule;
  double wall_seconds = 0.0;
  std::uint64_t provider_calls = 0;  // this invocation only
  std::uint64_t generation_calls = 0;
  std::uint64_t judge_calls = 0;
};

Json to_json(const RunRecord& r);
/// Throws BenchmarkError when stored aggregates differ from a recomputation
/// over the rows by more than 1e-9.
RunRecord record_from_json(const Json& j);
RunRecord load_record(const std::filesystem::path& report_json);

/// Everything a run needs besides the config.
struct Environment {
  explicit Environment(llm::Gateway& g) : gateway(g) {}
  llm::Gateway& gateway;
  embed::EmbeddingProvider* embedder = nullptr;  // required for bertscore
  select::SentenceScorer* scorer = nullptr;      // required for waus
  select::GdexLexicons gdex = select::GdexLexicons::load();
  const seg::Lexicon* lexicon = nullptr;  // required for the word scheme
  std::map<std::string, std::shared_ptr<gen::MethodAdapter>> adapters;
  std::map<std::string, judge::Split> splits;  // keyed by backbone
  std::string contamination_rule;
};

/// Throws BenchmarkError on empty lists, unknown methods or backbones and
/// on metric or selector settings the environment cannot serve.
void validate(const ExperimentConfig& cfg, const Environment& env);

std::string cell_fingerprint(const ExperimentConfig& cfg, const std::string& method,
                             const std::string& backbone, const std::string& corpus_id,
                             const std::string& selector_fp);

/// select, generate, score, judge and aggregate one (method, backbone) cell.
/// Resumes from `output_dir/<fingerprint>/` when files exist there.
RunRecord run_cell(const ExperimentConfig& cfg, Environment& env,
                   const std::vector<corpus::BuzzwordEntry>& corpus, const std::string& method,
                   const std::string& backbone);

/// Cells in config order: methods outer, backbones inner.
std::vector<RunRecord> run_grid(const ExperimentConfig& cfg, Environment& env,
                                const std::vector<corpus::BuzzwordEntry>& corpus);

/// Metric names summarized by the ablation: bleu, rouge_l, bertscore,
/// sa_mean, sc_mean (absent metrics are skipped).
std::map<std::string, double> headline_metrics(const Aggregate& a);

struct AblationPoint {
  std::string backbone;
  std::size_t size = 0;
  std::vector<std::string> combinations;  // "IU+CA" style
  std::vector<std::string> fingerprints;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // population
};

/// All k-subsets of the six aspects in lexicographic canonical order.
std::vector<std::vector<gen::AspectId>> aspect_combinations(std::size_t k);

/// RESS over every aspect combination of each size, per backbone. With
/// `sample_cap`, sizes with more combinations use a seeded sample.
std::vector<AblationPoint> ablate_aspects(const ExperimentConfig& cfg, Environment& env,
                                          const std::vector<corpus::BuzzwordEntry>& corpus,
                                          const std::vector<std::size_t>& sizes,
                                          std::optional<std::size_t> sample_cap = std::nullopt);
Json to_json(const AblationPoint& p);

struct VolumePoint {
  std::size_t k = 0;
  std::string method;
  std::string backbone;
  std::string fingerprint;
  Aggregate overall;
  std::optional<Aggregate> seen;
  std::optional<Aggregate> unseen;
  std::size_t n_short = 0;  // words with fewer than k examples
};

/// One grid per k. Throws std::logic_error if a selection at a smaller k is
/// not a prefix of the one at the next larger k.
std::vector<VolumePoint> volume_curve(const ExperimentConfig& cfg, Environment& env,
                                      const std::vector<corpus::BuzzwordEntry>& corpus,
                                      const std::vector<std::size_t>& ks);
Json to_json(const VolumePoint& p);

/// 1 - BERTScore F between aspect candidates, averaged over buzzwords, from
/// the aspect traces of RESS records.
metrics::DiversityMatrix aspect_diversity(const std::vector<RunRecord>& records,
                                          embed::EmbeddingProvider& provider,
                                          const metrics::BertScoreOptions& opts = {});

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first
/// exception is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace buzzdef::bench
