// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/waus.hpp"

#include <algorithm>
#include <cmath>
#include <map>


#include "buzzdef/resources.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::waus {

std::string mask_target(const std::string& sentence, const std::string& target,
                        const std::string& mask_token) {
  if (target.empty()) throw std::invalid_argument("empty target");
  if (text::contains(mask_token, target))
    throw std::invalid_argument("mask token contains the target");
  if (!text::contains(sentence, target))
    throw std::invalid_argument("target '" + target + "' does not occur in sentence");
  std::string out = sentence;
  // A pass can splice mask and context into a fresh occurrence, hence the loop.
  for (int pass = 0; pass < 64 && text::contains(out, target); ++pass)
    out = text::replace_all(out, target, mask_token);
  if (text::contains(out, target)) throw std::runtime_error("masking did not converge");
  return out;
}

Json to_json(const WausExample& e) {
  return Json{{"sentence", e.sentence},
              {"target", e.target},
              {"label", e.label == Label::Positive ? "positive" : "negative"},
              {"source", e.source == Source::Dictionary ? "dictionary" : "generated-negative"}};
}

WausExample example_from_json(const Json& j) {
  WausExample e;
  e.sentence = j.at("sentence").get<std::string>();
  e.target = j.at("target").get<std::string>();
  const auto label = j.at("label").get<std::string>();
  if (label == "positive" || label == "1") {
    e.label = Label::Positive;
  } else if (label == "negative" || label == "0") {
    e.label = Label::Negative;
  } else {
    throw std::invalid_argument("unknown label: " + label);
  }
  const auto source = j.value("source", std::string(label == "positive" ? "dictionary"
                                                                        : "generated-negative"));
  e.source = source == "dictionary" ? Source::Dictionary : Source::GeneratedNegative;
  if (!text::contains(e.sentence, e.target))
    throw std::invalid_argument("sentence does not contain target '" + e.target + "'");
  return e;
}

std::vector<WausExample> load_examples(const std::filesystem::path& path) {
  std::vector<WausExample> out;
  for_each_line(path, [&](std::size_t line, std::string_view raw) {
    try {
      out.push_back(example_from_json(Json::parse(raw)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void save_examples(const std::filesystem::path& path, const std::vector<WausExample>& xs) {
  std::vector<Json> rows;
  for (const auto& x : xs) rows.push_back(to_json(x));
  write_jsonl(path, rows);
}

std::pair<Matrix, Vector> embed_examples(const std::vector<WausExample>& data,
                                         embed::EmbeddingProvider& embed, std::size_t expected_dim,
                                         const std::string& mask_token) {
  std::vector<std::string> masked;
  masked.reserve(data.size());
  for (const auto& e : data) masked.push_back(mask_target(e.sentence, e.target, mask_token));
  const auto vecs = embed.pooled(masked);
  if (vecs.size() != data.size()) throw embed::EmbeddingError("provider returned wrong count");
  Matrix X(static_cast<Eigen::Index>(expected_dim), static_cast<Eigen::Index>(data.size()));
  Vector y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (static_cast<std::size_t>(vecs[i].size()) != expected_dim)
      throw embed::EmbeddingError("dimension mismatch: provider returned " +
                                  std::to_string(vecs[i].size()) + ", expected " +
                                  std::to_string(expected_dim));
    X.col(static_cast<Eigen::Index>(i)) = vecs[i];
    y[static_cast<Eigen::Index>(i)] = data[i].label == Label::Positive ? 1.0 : 0.0;
  }
  return {std::move(X), std::move(y)};
}

TrainResult train_on_examples(const std::vector<WausExample>& data, const TrainConfig& cfg,
                              embed::EmbeddingProvider& embed,
                              const std::vector<WausExample>& validation,
                              const std::string& mask_token) {
  auto [X, y] = embed_examples(data, embed, cfg.dims.input, mask_token);
  if (validation.empty()) return train_head(X, y, cfg);
  auto [Xv, yv] = embed_examples(validation, embed, cfg.dims.input, mask_token);
  return train_head(X, y, cfg, Validation{&Xv, &yv});
}

WausScorer::WausScorer(WausHead head, std::shared_ptr<embed::EmbeddingProvider> embed,
                       std::string mask_token)
    : head_(std::move(head)), embed_(std::move(embed)), mask_token_(std::move(mask_token)) {}

std::vector<double> WausScorer::score(const std::vector<std::string>& sentences,
                                      const std::string& target) {
  std::vector<std::string> masked;
  masked.reserve(sentences.size());
  for (const auto& s : sentences) masked.push_back(mask_target(s, target, mask_token_));
  const auto vecs = embed_->pooled(masked);
  std::vector<double> out;
  out.reserve(vecs.size());
  for (const auto& v : vecs) {
    if (static_cast<std::size_t>(v.size()) != head_.dims.input)
      throw embed::EmbeddingError("dimension mismatch: provider returned " +
                                  std::to_string(v.size()) + ", head expects " +
                                  std::to_string(head_.dims.input));
    out.push_back(head_.logit(v));
  }
  return out;
}

double WausScorer::score_one(const std::string& sentence, const std::string& target) {
  return score({sentence}, target).at(0);
}

std::string WausScorer::fingerprint() const { return "waus:" + head_.digest() + ":" + mask_token_; }

std::vector<DictionaryPair> load_dictionary_pairs(const std::filesystem::path& path) {
  std::vector<DictionaryPair> out;
  for_each_line(path, [&](std::size_t line, std::string_view raw) {
    const Json j = Json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("word") || !j.contains("example"))
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": expected {word, example}");
    out.push_back({j["word"].get<std::string>(), j["example"].get<std::string>()});
  });
  return out;
}

std::string render_negative_prompt(const std::string& word, std::size_t count,
                                   const std::optional<std::filesystem::path>& template_dir) {
  auto t = load_resource(template_dir, "waus_negative.txt");
  t = text::replace_all(t, "[COUNT]", std::to_string(count));
  return text::replace_all(t, "[BUZZWORD]", word);
}

TrainingSet build_training_set(const std::vector<DictionaryPair>& pairs, llm::Gateway& gateway,
                               const TrainingSetOptions& opts, WausScorer* current) {
  if (pairs.empty()) throw std::invalid_argument("empty dictionary input");
  TrainingSet ts;
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<std::string> words;
  for (const auto& p : pairs) {
    if (opts.excluded_words.count(p.word))
      throw std::invalid_argument("dictionary word '" + p.word +
                                  "' belongs to the benchmark corpus and must be excluded");
    if (!text::contains(p.example, p.word)) {
      ts.warnings.push_back("dropped dictionary example without its word: " + p.word);
      continue;
    }
    if (!seen.insert({p.word, p.example}).second) {
      ++ts.duplicates_dropped;
      continue;
    }
    if (std::find(words.begin(), words.end(), p.word) == words.end()) words.push_back(p.word);
    ts.examples.push_back({p.example, p.word, Label::Positive, Source::Dictionary});
  }
  ts.n_positive = ts.examples.size();

  for (const auto& w : words) {
    llm::LlmRequest req;
    req.backbone_id = opts.backbone_id;
    req.prompt = render_negative_prompt(w, opts.negatives_per_word, opts.template_dir);
    auto res = gateway.complete_structured(req, payload::negatives_schema());
    for (const auto& s : res.payload.list("例句")) {
      const auto sentence = text::trim(s);
      if (!text::contains(sentence, w)) {
        ts.warnings.push_back("generated negative without the word dropped: " + w);
        continue;
      }
      if (!seen.insert({w, sentence}).second) {
        ++ts.duplicates_dropped;
        continue;
      }
      ts.examples.push_back({sentence, w, Label::Negative, Source::GeneratedNegative});
    }
  }
  ts.n_negative = ts.examples.size() - ts.n_positive;

  if (opts.review_budget == 0) {
    ts.warnings.push_back("review budget is 0: all " + std::to_string(ts.n_negative) +
                          " generated negatives accepted without review");
    return ts;
  }
  for (std::size_t i = ts.n_positive; i < ts.examples.size(); ++i) {
    const auto& e = ts.examples[i];
    double p = 0.5;
    if (current) p = 1.0 / (1.0 + std::exp(-current->score_one(e.sentence, e.target)));
    ts.worksheet.push_back({e.target, e.sentence, p});
  }
  std::stable_sort(ts.worksheet.begin(), ts.worksheet.end(),
                   [](const WorksheetRow& a, const WorksheetRow& b) { return a.p_positive > b.p_positive; });
  if (ts.worksheet.size() > opts.review_budget) ts.worksheet.resize(opts.review_budget);
  return ts;
}

}  // namespace buzzdef::waus
