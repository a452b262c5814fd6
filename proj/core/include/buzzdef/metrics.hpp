// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "buzzdef/embedding.hpp"
#include "buzzdef/jsonl.hpp"
#include "buzzdef/segmenter.hpp"

namespace buzzdef::metrics {

enum class Scheme { Char, LexiconWord };

struct TokenSeq {
  std::vector<std::string> tokens;
  Scheme scheme = Scheme::Char;
};

/// Char: one token per scalar value, whitespace dropped. LexiconWord: the
/// selector segmenter over `lex` (required for that scheme).
TokenSeq tokenize(const std::string& text, Scheme scheme = Scheme::Char,
                  const seg::Lexicon* lex = nullptr);

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Smoothing {
  None,
  /// (0 + 1) / (total + 1) for orders n >= 2 whose clipped count is zero.
  AddOne,
};

struct BleuOptions {
  int max_n = 4;
  Smoothing smoothing = Smoothing::AddOne;
};

struct BleuDetail {
  double score = 0.0;
  std::vector<double> precisions;  // p_1..p_max_n after smoothing
  double brevity_penalty = 1.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length
  std::vector<std::string> warnings;
};

BleuDetail bleu_detail(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                       const BleuOptions& opts = {});
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
            const BleuOptions& opts = {});

/// Counts pooled over all pairs before taking precisions.
double corpus_bleu(const std::vector<TokenSeq>& candidates,
                   const std::vector<std::vector<TokenSeq>>& references,
                   const BleuOptions& opts = {});

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

struct BertScoreOptions {
  bool idf = false;
  std::map<std::string, double> idf_weights;  // token -> weight; missing tokens weigh 1
  bool rescale_with_baseline = false;
  double baseline = 0.0;
};

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::vector<std::string> warnings;
};

BertScore bertscore(const std::string& candidate, const std::string& reference,
                    embed::EmbeddingProvider& provider, const BertScoreOptions& opts = {});

/// Same, on embeddings already fetched.
BertScore bertscore(const embed::TokenEmbedding& candidate, const embed::TokenEmbedding& reference,
                    const BertScoreOptions& opts = {});

/// idf(w) = log((M + 1) / (df(w) + 1)) over a reference set of M texts.
std::map<std::string, double> compute_idf(const std::vector<std::string>& references,
                                          embed::EmbeddingProvider& provider);

struct DiversityMatrix {
  std::vector<std::string> labels;  // aspect codes, row/column order
  Eigen::MatrixXd value;            // mean of 1 - F
  Eigen::MatrixXi count;            // buzzwords contributing to each cell
  std::size_t skipped_pairs = 0;    // (word, a, b) with a missing definition
};

/// `per_word[i]` maps aspect code -> definition for one buzzword.
DiversityMatrix diversity_matrix(const std::vector<std::map<std::string, std::string>>& per_word,
                                 const std::vector<std::string>& labels,
                                 embed::EmbeddingProvider& provider,
                                 const BertScoreOptions& opts = {});

struct PairInput {
  std::string word;
  std::string candidate;
  std::string reference;
};

struct PairMetrics {
  std::string word;
  double bleu = 0.0;
  double rouge_l = 0.0;
  std::optional<double> bertscore_f;
};

struct MetricOptions {
  Scheme scheme = Scheme::Char;
  const seg::Lexicon* lexicon = nullptr;
  BleuOptions bleu;
  BertScoreOptions bertscore;
  bool with_bertscore = true;
};

struct MetricReport {
  std::vector<PairMetrics> pairs;
  double bleu_mean = 0.0;
  double rouge_l_mean = 0.0;
  std::optional<double> bertscore_mean;
  double corpus_bleu = 0.0;
  std::vector<std::string> warnings;
};

/// `provider` may be null when opts.with_bertscore is false.
MetricReport score_pairs(const std::vector<PairInput>& pairs, const MetricOptions& opts,
                         embed::EmbeddingProvider* provider);

Json to_json(const PairMetrics& m);
PairMetrics pair_metrics_from_json(const Json& j);

}  // namespace buzzdef::metrics
