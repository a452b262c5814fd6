// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/selectors.hpp"

#include <algorithm>
#include <numeric>

#include "buzzdef/digest.hpp"
#include "buzzdef/random.hpp"
#include "buzzdef/resources.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::select {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::All:
      return "all";
    case Strategy::Random:
      return "random";
    case Strategy::Gdex:
      return "gdex";
    case Strategy::Waus:
      return "waus";
  }
  return "all";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "all") return Strategy::All;
  if (s == "random") return Strategy::Random;
  if (s == "gdex") return Strategy::Gdex;
  if (s == "waus") return Strategy::Waus;
  throw std::invalid_argument("unknown selection strategy: " + s);
}

void validate(const SelectionConfig& cfg) {
  if (cfg.strategy != Strategy::All && cfg.k == 0)
    throw std::invalid_argument("k must be at least 1 for strategy " + to_string(cfg.strategy));
}

GdexLexicons GdexLexicons::load(const std::optional<std::filesystem::path>& dir) {
  GdexLexicons lex;
  lex.common_words = seg::Lexicon(text::parse_list(load_resource(dir, "common_words.txt")));
  lex.pronouns = seg::Lexicon(text::parse_list(load_resource(dir, "pronouns.txt")));
  return lex;
}

namespace {

std::vector<std::string> split_on(const std::string& s, const std::string& needle,
                                  std::size_t& occurrences) {
  std::vector<std::string> pieces;
  occurrences = 0;
  if (needle.empty()) return {s};
  std::size_t pos = 0;
  while (true) {
    auto hit = s.find(needle, pos);
    if (hit == std::string::npos) break;
    pieces.push_back(s.substr(pos, hit - pos));
    ++occurrences;
    pos = hit + needle.size();
  }
  pieces.push_back(s.substr(pos));
  return pieces;
}

bool bad_boundary(char32_t c) { return text::is_digit(c) || text::is_punctuation(c); }

}  // namespace

SelectionScore gdex_score(const std::string& sentence, const std::string& target,
                          const GdexLexicons& lex) {
  const auto& w = lex.weights;
  SelectionScore s;
  const std::string trimmed = text::trim(sentence);
  const auto u = text::decode_utf8(trimmed);
  const std::size_t len = u.size();

  s.breakdown["length"] = (len < w.min_len || len > w.max_len) ? w.length_penalty : 0.0;

  std::size_t occurrences = 0;
  const auto pieces = split_on(trimmed, target, occurrences);

  std::size_t pronouns = 0;
  for (const auto& p : pieces) pronouns += seg::count_longest_matches(p, lex.pronouns);
  s.breakdown["pronoun"] = w.pronoun_penalty * static_cast<double>(pronouns);

  const bool boundary = !u.empty() && (bad_boundary(u.front()) || bad_boundary(u.back()));
  s.breakdown["boundary"] = boundary ? w.boundary_penalty : 0.0;

  std::size_t total_words = occurrences, common = 0;
  for (const auto& p : pieces) {
    for (const auto& tok : seg::segment(p, lex.common_words, lex.mode)) {
      if (seg::is_punctuation_token(tok)) continue;
      ++total_words;
      if (lex.common_words.contains(std::string_view(tok))) ++common;
    }
  }
  const double ratio =
      total_words == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(total_words);
  s.breakdown["common_ratio"] = w.common_ratio * ratio;

  s.total = 0.0;
  for (const auto& [k, v] : s.breakdown) s.total += v;
  return s;
}

std::vector<std::size_t> rank_by_score(const std::vector<SelectionScore>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].total != scores[b].total) return scores[a].total > scores[b].total;
    return scores[a].sentence_index < scores[b].sentence_index;
  });
  std::vector<std::size_t> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(scores[i].sentence_index);
  return out;
}

Selection select(const corpus::BuzzwordEntry& entry, const SelectionConfig& cfg,
                 const GdexLexicons& lex, SentenceScorer* scorer) {
  validate(cfg);
  Selection sel;
  const std::size_t n = entry.examples.size();
  std::vector<std::size_t> order;

  switch (cfg.strategy) {
    case Strategy::All:
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      break;
    case Strategy::Random: {
      DeterministicRng rng(derive_seed(cfg.seed, entry.word));
      order = rng.permutation(n);
      break;
    }
    case Strategy::Gdex:
      for (std::size_t i = 0; i < n; ++i) {
        auto s = gdex_score(entry.examples[i], entry.word, lex);
        s.sentence_index = i;
        sel.scores.push_back(std::move(s));
      }
      order = rank_by_score(sel.scores);
      break;
    case Strategy::Waus: {
      if (!scorer) throw SelectionError("waus selection requires a trained scorer");
      const auto logits = scorer->score(entry.examples, entry.word);
      if (logits.size() != n) throw SelectionError("scorer returned wrong number of scores");
      for (std::size_t i = 0; i < n; ++i) {
        SelectionScore s;
        s.sentence_index = i;
        s.total = logits[i];
        s.breakdown["logit"] = logits[i];
        sel.scores.push_back(std::move(s));
      }
      order = rank_by_score(sel.scores);
      break;
    }
  }

  if (cfg.strategy != Strategy::All) {
    if (n < cfg.k) sel.short_of_k = true;
    if (order.size() > cfg.k) order.resize(cfg.k);
  }
  sel.indices = order;
  for (auto i : order) sel.sentences.push_back(entry.examples[i]);
  return sel;
}

Json to_json(const SelectionConfig& cfg) {
  Json j{{"strategy", to_string(cfg.strategy)}};
  if (cfg.strategy != Strategy::All) j["k"] = cfg.k;
  if (cfg.strategy == Strategy::Random) j["seed"] = cfg.seed;
  return j;
}

SelectionConfig selection_config_from_json(const Json& j) {
  SelectionConfig cfg;
  cfg.strategy = strategy_from_string(j.value("strategy", std::string("all")));
  cfg.k = j.value("k", std::size_t{10});
  cfg.seed = j.value("seed", std::uint64_t{0});
  validate(cfg);
  return cfg;
}

std::string selector_fingerprint(const SelectionConfig& cfg, const SentenceScorer* scorer) {
  Json j = to_json(cfg);
  if (cfg.strategy == Strategy::Waus && scorer) j["scorer"] = scorer->fingerprint();
  return sha256_hex(dump_line(j)).substr(0, 16);
}

Json selection_to_json(const std::string& word, const Selection& s) {
  Json scores = Json::array();
  for (const auto& sc : s.scores)
    scores.push_back({{"index", sc.sentence_index}, {"total", sc.total}, {"breakdown", sc.breakdown}});
  return Json{{"word", word}, {"indices", s.indices}, {"short_of_k", s.short_of_k}, {"scores", scores}};
}

}  // namespace buzzdef::select
