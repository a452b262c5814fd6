// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "buzzdef/text.hpp"

namespace buzzdef::metrics {

TokenSeq tokenize(const std::string& s, Scheme scheme, const seg::Lexicon* lex) {
  TokenSeq t;
  t.scheme = scheme;
  if (scheme == Scheme::Char) {
    for (auto& c : text::split_scalars(s))
      if (!text::is_whitespace(text::decode_utf8(c).at(0))) t.tokens.push_back(std::move(c));
    return t;
  }
  if (!lex) throw std::invalid_argument("lexicon-word tokenization needs a lexicon");
  t.tokens = seg::segment(s, *lex, seg::SegmentMode::LexiconWord);
  return t;
}

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += toks[i + k];
      key += '\x1f';
    }
    ++out[key];
  }
  return out;
}

struct OrderCounts {
  std::size_t matched = 0;
  std::size_t total = 0;
};

std::vector<OrderCounts> clipped_counts(const TokenSeq& cand, const std::vector<TokenSeq>& refs,
                                        int max_n) {
  std::vector<OrderCounts> out(static_cast<std::size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    const auto c = ngrams(cand.tokens, static_cast<std::size_t>(n));
    NgramCounts max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : ngrams(r.tokens, static_cast<std::size_t>(n)))
        max_ref[g] = std::max(max_ref[g], k);
    auto& oc = out[static_cast<std::size_t>(n - 1)];
    for (const auto& [g, k] : c) {
      oc.total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) oc.matched += std::min(k, it->second);
    }
  }
  return out;
}

std::size_t closest_ref_length(std::size_t c, const std::vector<TokenSeq>& refs) {
  std::size_t best = refs.front().tokens.size();
  for (const auto& r : refs) {
    const std::size_t len = r.tokens.size();
    const auto d = [c](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(len) < d(best) || (d(len) == d(best) && len < best)) best = len;
  }
  return best;
}

BleuDetail combine(const std::vector<OrderCounts>& counts, std::size_t c, std::size_t r,
                   const BleuOptions& opts) {
  BleuDetail d;
  d.candidate_length = c;
  d.reference_length = r;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& oc = counts[i];
    double p;
    if (oc.total == 0) {
      p = 1.0;  // candidate shorter than n: the order carries no evidence
    } else if (oc.matched == 0 && i >= 1 && opts.smoothing == Smoothing::AddOne) {
      p = 1.0 / static_cast<double>(oc.total + 1);
    } else {
      p = static_cast<double>(oc.matched) / static_cast<double>(oc.total);
    }
    d.precisions.push_back(p);
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  d.brevity_penalty = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  d.score = zero ? 0.0 : d.brevity_penalty * std::exp(log_sum / static_cast<double>(counts.size()));
  return d;
}

}  // namespace

BleuDetail bleu_detail(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                       const BleuOptions& opts) {
  if (opts.max_n < 1) throw std::invalid_argument("max_n must be positive");
  if (references.empty()) throw std::invalid_argument("at least one reference required");
  for (const auto& r : references)
    if (r.scheme != candidate.scheme) throw std::invalid_argument("token schemes differ");
  if (candidate.tokens.empty()) {
    BleuDetail d;
    d.reference_length = closest_ref_length(0, references);
    d.precisions.assign(static_cast<std::size_t>(opts.max_n), 0.0);
    d.warnings.push_back("empty candidate scored 0");
    return d;
  }
  const auto counts = clipped_counts(candidate, references, opts.max_n);
  const std::size_t c = candidate.tokens.size();
  return combine(counts, c, closest_ref_length(c, references), opts);
}

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
            const BleuOptions& opts) {
  return bleu_detail(candidate, references, opts).score;
}

double corpus_bleu(const std::vector<TokenSeq>& candidates,
                   const std::vector<std::vector<TokenSeq>>& references, const BleuOptions& opts) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("candidate and reference counts differ");
  std::vector<OrderCounts> total(static_cast<std::size_t>(opts.max_n));
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw std::invalid_argument("at least one reference required");
    const auto counts = clipped_counts(candidates[i], references[i], opts.max_n);
    for (std::size_t n = 0; n < counts.size(); ++n) {
      total[n].matched += counts[n].matched;
      total[n].total += counts[n].total;
    }
    c += candidates[i].tokens.size();
    r += closest_ref_length(candidates[i].tokens.size(), references[i]);
  }
  if (c == 0) return 0.0;
  return combine(total, c, r, opts).score;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.scheme != reference.scheme) throw std::invalid_argument("token schemes differ");
  if (candidate.tokens.empty() || reference.tokens.empty()) return 0.0;
  const auto l = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  const double p = l / static_cast<double>(candidate.tokens.size());
  const double r = l / static_cast<double>(reference.tokens.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

namespace {

struct Usable {
  std::vector<embed::Vector> unit;
  std::vector<double> weight;
};

Usable usable_tokens(const embed::TokenEmbedding& te, const BertScoreOptions& opts,
                     std::vector<std::string>& warnings) {
  Usable u;
  for (std::size_t i = 0; i < te.vectors.size(); ++i) {
    if (i < te.special_mask.size() && te.special_mask[i]) continue;
    const double n = te.vectors[i].norm();
    if (n == 0.0 || !std::isfinite(n)) {
      warnings.push_back("zero-norm vector for token '" + te.tokens[i] + "' excluded");
      continue;
    }
    u.unit.push_back(te.vectors[i] / n);
    double w = 1.0;
    if (opts.idf) {
      auto it = opts.idf_weights.find(te.tokens[i]);
      if (it != opts.idf_weights.end()) w = it->second;
    }
    u.weight.push_back(w);
  }
  return u;
}

double greedy(const Usable& from, const Usable& to) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < from.unit.size(); ++i) {
    double best = -1.0;
    for (const auto& v : to.unit) best = std::max(best, from.unit[i].dot(v));
    num += from.weight[i] * best;
    den += from.weight[i];
  }
  return den == 0.0 ? 0.0 : num / den;
}

}  // namespace

BertScore bertscore(const embed::TokenEmbedding& cand, const embed::TokenEmbedding& ref,
                    const BertScoreOptions& opts) {
  BertScore s;
  const auto c = usable_tokens(cand, opts, s.warnings);
  const auto r = usable_tokens(ref, opts, s.warnings);
  if (c.unit.empty() || r.unit.empty()) throw MetricError("empty token set");
  if (c.unit.front().size() != r.unit.front().size()) throw MetricError("embedding dimensions differ");
  s.precision = greedy(c, r);
  s.recall = greedy(r, c);
  if (opts.rescale_with_baseline) {
    const double b = opts.baseline;
    if (b >= 1.0) throw std::invalid_argument("baseline must be below 1");
    s.precision = (s.precision - b) / (1.0 - b);
    s.recall = (s.recall - b) / (1.0 - b);
  }
  const double sum = s.precision + s.recall;
  s.f = sum == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / sum;
  return s;
}

BertScore bertscore(const std::string& candidate, const std::string& reference,
                    embed::EmbeddingProvider& provider, const BertScoreOptions& opts) {
  if (text::trim(candidate).empty() || text::trim(reference).empty())
    throw MetricError("empty token set");
  const auto te = provider.tokens({candidate, reference});
  return bertscore(te.at(0), te.at(1), opts);
}

std::map<std::string, double> compute_idf(const std::vector<std::string>& references,
                                          embed::EmbeddingProvider& provider) {
  std::map<std::string, std::size_t> df;
  const auto all = provider.tokens(references);
  for (const auto& te : all) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < te.tokens.size(); ++i)
      if (!(i < te.special_mask.size() && te.special_mask[i])) seen.insert(te.tokens[i]);
    for (const auto& t : seen) ++df[t];
  }
  std::map<std::string, double> out;
  const auto m = static_cast<double>(references.size());
  for (const auto& [t, d] : df) out[t] = std::log((m + 1.0) / (static_cast<double>(d) + 1.0));
  return out;
}

DiversityMatrix diversity_matrix(const std::vector<std::map<std::string, std::string>>& per_word,
                                 const std::vector<std::string>& labels,
                                 embed::EmbeddingProvider& provider,
                                 const BertScoreOptions& opts) {
  const auto k = static_cast<Eigen::Index>(labels.size());
  DiversityMatrix d;
  d.labels = labels;
  d.value = Eigen::MatrixXd::Zero(k, k);
  d.count = Eigen::MatrixXi::Zero(k, k);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  for (const auto& defs : per_word) {
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = a + 1; b < k; ++b) {
        auto ia = defs.find(labels[static_cast<std::size_t>(a)]);
        auto ib = defs.find(labels[static_cast<std::size_t>(b)]);
        if (ia == defs.end() || ib == defs.end()) {
          ++d.skipped_pairs;
          continue;
        }
        sum(a, b) += 1.0 - bertscore(ia->second, ib->second, provider, opts).f;
        ++d.count(a, b);
      }
    }
  }
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double v = d.count(a, b) ? sum(a, b) / d.count(a, b) : 0.0;
      d.value(a, b) = d.value(b, a) = v;
      d.count(b, a) = d.count(a, b);
    }
  }
  return d;
}

MetricReport score_pairs(const std::vector<PairInput>& pairs, const MetricOptions& opts,
                         embed::EmbeddingProvider* provider) {
  if (opts.with_bertscore && !provider)
    throw std::invalid_argument("bertscore requested without an embedding provider");
  MetricReport rep;
  std::vector<TokenSeq> cands;
  std::vector<std::vector<TokenSeq>> refs;
  double bs_sum = 0.0;
  std::size_t bs_n = 0;
  for (const auto& p : pairs) {
    PairMetrics m;
    m.word = p.word;
    auto c = tokenize(p.candidate, opts.scheme, opts.lexicon);
    auto r = tokenize(p.reference, opts.scheme, opts.lexicon);
    auto bd = bleu_detail(c, {r}, opts.bleu);
    for (auto& w : bd.warnings) rep.warnings.push_back(p.word + ": " + w);
    m.bleu = bd.score;
    m.rouge_l = rouge_l(c, r);
    if (opts.with_bertscore) {
      try {
        auto bs = bertscore(p.candidate, p.reference, *provider, opts.bertscore);
        for (auto& w : bs.warnings) rep.warnings.push_back(p.word + ": " + w);
        m.bertscore_f = bs.f;
        bs_sum += bs.f;
        ++bs_n;
      } catch (const MetricError& e) {
        rep.warnings.push_back(p.word + ": bertscore skipped: " + e.what());
      }
    }
    rep.bleu_mean += m.bleu;
    rep.rouge_l_mean += m.rouge_l;
    cands.push_back(std::move(c));
    refs.push_back({std::move(r)});
    rep.pairs.push_back(std::move(m));
  }
  if (!pairs.empty()) {
    rep.bleu_mean /= static_cast<double>(pairs.size());
    rep.rouge_l_mean /= static_cast<double>(pairs.size());
    rep.corpus_bleu = corpus_bleu(cands, refs, opts.bleu);
  }
  if (bs_n) rep.bertscore_mean = bs_sum / static_cast<double>(bs_n);
  return rep;
}

Json to_json(const PairMetrics& m) {
  return Json{{"word", m.word},
              {"bleu", m.bleu},
              {"rouge_l", m.rouge_l},
              {"bertscore_f", m.bertscore_f ? Json(*m.bertscore_f) : Json(nullptr)}};
}

PairMetrics pair_metrics_from_json(const Json& j) {
  PairMetrics m;
  m.word = j.at("word").get<std::string>();
  m.bleu = j.at("bleu").get<double>();
  m.rouge_l = j.at("rouge_l").get<double>();
  if (j.contains("bertscore_f") && j["bertscore_f"].is_number()) m.bertscore_f = j["bertscore_f"].get<double>();
  return m;
}

}  // namespace buzzdef::metrics
