// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/judge.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "buzzdef/generation.hpp"
#include "buzzdef/payload.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::judge {

namespace {
std::string str(std::string_view s) { return std::string(s); }
bool in_range(std::int64_t v) { return v >= 1 && v <= 5; }
}  // namespace

Json to_json(const JudgeVerdict& v) {
  return Json{{"word", v.word},     {"sa", v.sa}, {"sa_reason", v.sa_reason},
              {"sc", v.sc},         {"sc_reason", v.sc_reason},
              {"judge_backbone", v.judge_backbone}, {"calls", v.calls}};
}

JudgeVerdict verdict_from_json(const Json& j) {
  JudgeVerdict v;
  v.word = j.at("word").get<std::string>();
  v.sa = j.at("sa").get<int>();
  v.sa_reason = j.value("sa_reason", std::string());
  v.sc = j.at("sc").get<int>();
  v.sc_reason = j.value("sc_reason", std::string());
  v.judge_backbone = j.value("judge_backbone", std::string());
  v.calls = j.value("calls", 0);
  if (!in_range(v.sa) || !in_range(v.sc)) throw JudgeError("stored verdict for " + v.word + " out of range");
  return v;
}

tmpl::Rendered render_judge_prompt(const std::string& predicted, const std::string& gold,
                                   const std::optional<std::filesystem::path>& template_dir) {
  const auto t = tmpl::load_template(template_dir, "judge.txt");
  return tmpl::render(t, {{str(tmpl::kPredicted), predicted}, {str(tmpl::kGold), gold}});
}

JudgeVerdict judge_definition(const std::string& predicted, const std::string& gold,
                              const std::string& word, llm::Gateway& gateway,
                              const JudgeOptions& opts) {
  if (text::trim(predicted).empty()) throw JudgeError("empty predicted definition for " + word);
  if (text::trim(gold).empty()) throw JudgeError("empty gold definition for " + word);
  if (opts.judge_backbone.empty()) throw JudgeError("no judge backbone configured");
  llm::LlmRequest req;
  req.backbone_id = opts.judge_backbone;
  req.prompt = render_judge_prompt(predicted, gold, opts.template_dir).text;
  req.temperature = opts.temperature;
  req.seed = opts.seed;
  req.max_output = opts.max_output;

  const auto schema = payload::judge_schema();
  JudgeVerdict v;
  v.word = word;
  v.judge_backbone = opts.judge_backbone;
  for (int round = 0; round < 2; ++round) {
    llm::StructuredResult res;
    try {
      res = gateway.complete_structured(req, schema);
    } catch (const payload::PayloadError& e) {
      throw JudgeError("judge reply for " + word + " unparseable after retry: " + e.what());
    }
    v.calls += res.calls;
    const auto& sa = res.payload.score("准确性");
    const auto& sc = res.payload.score("细节完整性");
    if (in_range(sa.score) && in_range(sc.score)) {
      v.sa = static_cast<int>(sa.score);
      v.sa_reason = sa.reason;
      v.sc = static_cast<int>(sc.score);
      v.sc_reason = sc.reason;
      return v;
    }
    spdlog::warn("judge scores ({}, {}) for {} outside 1..5", sa.score, sc.score, word);
    if (round == 0) {
      req.prompt += "\n";
      req.prompt += kRangeReminder;
    } else {
      throw OutOfRangeError("judge scores for " + word + " outside 1..5 after re-query (" +
                            std::to_string(sa.score) + ", " + std::to_string(sc.score) + ")");
    }
  }
  throw std::logic_error("unreachable");
}

std::string default_judge_backbone(const llm::GatewayConfig& cfg) {
  if (cfg.judge_backbone) return *cfg.judge_backbone;
  if (cfg.backbones.empty()) throw llm::ConfigError("no backbones configured");
  const llm::BackboneConfig* best = nullptr;
  for (const auto& [id, b] : cfg.backbones)  // map order: ascending id
    if (!best || b.strength > best->strength) best = &b;
  return best->id;
}

std::string to_string(Status s) { return s == Status::Seen ? "seen" : "unseen"; }

Status status_from_string(const std::string& s) {
  if (s == "seen") return Status::Seen;
  if (s == "unseen") return Status::Unseen;
  throw std::invalid_argument("unknown contamination status: " + s);
}

std::string to_string(ThresholdRule r) {
  switch (r) {
    case ThresholdRule::Min: return "min";
    case ThresholdRule::Mean: return "mean";
    case ThresholdRule::SaOnly: return "sa-only";
  }
  return "min";
}

ThresholdRule rule_from_string(const std::string& s) {
  if (s == "min") return ThresholdRule::Min;
  if (s == "mean") return ThresholdRule::Mean;
  if (s == "sa-only" || s == "sa_only") return ThresholdRule::SaOnly;
  throw std::invalid_argument("unknown threshold rule: " + s);
}

bool is_unseen(int sa, int sc, ThresholdRule rule, int threshold) {
  switch (rule) {
    case ThresholdRule::Min: return std::min(sa, sc) < threshold;
    case ThresholdRule::Mean: return sa + sc < 2 * threshold;  // (sa+sc)/2 < t without rounding
    case ThresholdRule::SaOnly: return sa < threshold;
  }
  return false;
}

Status effective_status(const ContaminationTag& t) {
  if (t.human_override) return *t.human_override ? Status::Seen : Status::Unseen;
  return t.status;
}

Json to_json(const ContaminationTag& t) {
  return Json{{"word", t.word},
              {"backbone_id", t.backbone_id},
              {"status", to_string(t.status)},
              {"probe_sa", t.probe_sa},
              {"probe_sc", t.probe_sc},
              {"human_override", t.human_override ? Json(*t.human_override) : Json(nullptr)},
              {"rule", to_string(t.rule)},
              {"probe_definition", t.probe_definition}};
}

ContaminationTag tag_from_json(const Json& j) {
  ContaminationTag t;
  t.word = j.at("word").get<std::string>();
  t.backbone_id = j.at("backbone_id").get<std::string>();
  t.status = status_from_string(j.at("status").get<std::string>());
  t.probe_sa = j.at("probe_sa").get<int>();
  t.probe_sc = j.at("probe_sc").get<int>();
  if (j.contains("human_override") && j["human_override"].is_boolean())
    t.human_override = j["human_override"].get<bool>();
  t.rule = rule_from_string(j.value("rule", std::string("min")));
  t.probe_definition = j.value("probe_definition", std::string());
  return t;
}

std::vector<ContaminationTag> load_tags(const std::filesystem::path& path) {
  std::vector<ContaminationTag> out;
  for (const auto& j : read_jsonl(path)) out.push_back(tag_from_json(j));
  return out;
}

void save_tags(const std::filesystem::path& path, const std::vector<ContaminationTag>& tags) {
  std::vector<Json> rows;
  rows.reserve(tags.size());
  for (const auto& t : tags) rows.push_back(to_json(t));
  write_jsonl(path, rows);
}

ContaminationTag contamination_probe(const corpus::BuzzwordEntry& entry, llm::Gateway& gateway,
                                     const ProbeOptions& opts) {
  gen::GenerationOptions g;
  g.backbone_id = opts.backbone_id;
  g.template_dir = opts.template_dir;
  gen::Generator generator(gateway, g);
  const auto def = generator.dp_no_ugc(entry.word);
  const auto v = judge_definition(def.definition, entry.definition, entry.word, gateway, opts.judge);
  ContaminationTag t;
  t.word = entry.word;
  t.backbone_id = opts.backbone_id;
  t.probe_sa = v.sa;
  t.probe_sc = v.sc;
  t.rule = opts.rule;
  t.status = is_unseen(v.sa, v.sc, opts.rule, opts.threshold) ? Status::Unseen : Status::Seen;
  t.probe_definition = def.definition;
  return t;
}

ProbeBatch probe_corpus(const std::vector<corpus::BuzzwordEntry>& corpus, llm::Gateway& gateway,
                        const ProbeOptions& opts, std::size_t workers) {
  std::vector<std::optional<ContaminationTag>> tags(corpus.size());
  std::vector<std::string> errors(corpus.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < corpus.size();) {
      try {
        tags[i] = contamination_probe(corpus[i], gateway, opts);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, corpus.size()));
  for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  ProbeBatch out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (tags[i]) {
      out.tags.push_back(std::move(*tags[i]));
    } else {
      spdlog::warn("probe for {} on {} undetermined: {}", corpus[i].word, opts.backbone_id, errors[i]);
      out.undetermined[corpus[i].word] = errors[i];
    }
  }
  return out;
}

void assert_partition(const Split& s, const std::set<std::string>& words) {
  std::size_t covered = 0;
  for (const auto* part : {&s.seen, &s.unseen, &s.undetermined}) {
    for (const auto& w : *part)
      if (!words.count(w)) throw std::logic_error("split for " + s.backbone_id + " has foreign word " + w);
    covered += part->size();
  }
  for (const auto& w : s.seen)
    if (s.unseen.count(w) || s.undetermined.count(w))
      throw std::logic_error("split for " + s.backbone_id + " is not disjoint at " + w);
  for (const auto& w : s.unseen)
    if (s.undetermined.count(w))
      throw std::logic_error("split for " + s.backbone_id + " is not disjoint at " + w);
  if (covered != words.size())
    throw std::logic_error("split for " + s.backbone_id + " does not cover the corpus");
}

std::map<std::string, Split> split_by_contamination(
    const std::vector<ContaminationTag>& tags, const std::vector<corpus::BuzzwordEntry>& corpus,
    const std::map<std::string, std::set<std::string>>& undetermined) {
  std::set<std::string> words;
  for (const auto& e : corpus) words.insert(e.word);

  std::map<std::string, Split> out;
  for (const auto& [bb, und] : undetermined) {
    auto& s = out[bb];
    s.backbone_id = bb;
    for (const auto& w : und) {
      if (!words.count(w)) throw JudgeError("undetermined word " + w + " not in corpus");
      s.undetermined.insert(w);
    }
  }
  for (const auto& t : tags) {
    if (!words.count(t.word)) throw JudgeError("tag for unknown word " + t.word + " on " + t.backbone_id);
    auto& s = out[t.backbone_id];
    s.backbone_id = t.backbone_id;
    if (s.seen.count(t.word) || s.unseen.count(t.word) || s.undetermined.count(t.word))
      throw JudgeError("duplicate tag for " + t.word + " on " + t.backbone_id);
    (effective_status(t) == Status::Seen ? s.seen : s.unseen).insert(t.word);
  }
  for (auto& [bb, s] : out) {
    for (const auto& w : words)
      if (!s.seen.count(w) && !s.unseen.count(w) && !s.undetermined.count(w))
        throw JudgeError("missing tag for " + w + " on " + bb);
    assert_partition(s, words);
  }
  return out;
}

std::map<std::string, std::vector<int>> load_override_votes(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw JudgeError("override directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& de : std::filesystem::directory_iterator(dir))
    if (de.is_regular_file()) files.push_back(de.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<int>> votes;
  for (const auto& f : files) {
    std::set<std::string> seen_here;
    for_each_line(f, [&](std::size_t line_no, std::string_view raw) {
      const auto line = text::trim(raw);
      if (line.empty() || line[0] == '#') return;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw JudgeError(f.string() + ":" + std::to_string(line_no) + ": expected word<TAB>vote");
      const auto word = text::trim(line.substr(0, tab));
      const auto vote = text::trim(line.substr(tab + 1));
      if (vote != "0" && vote != "1")
        throw JudgeError(f.string() + ":" + std::to_string(line_no) + ": vote must be 0 or 1");
      if (!seen_here.insert(word).second)
        throw JudgeError(f.string() + ":" + std::to_string(line_no) + ": second vote for " + word);
      votes[word].push_back(vote == "1" ? 1 : 0);
    });
  }
  return votes;
}

std::size_t apply_overrides(std::vector<ContaminationTag>& tags,
                            const std::map<std::string, std::vector<int>>& votes) {
  std::size_t changed = 0;
  for (auto& t : tags) {
    auto it = votes.find(t.word);
    if (it == votes.end()) continue;
    const auto yes = std::count(it->second.begin(), it->second.end(), 1);
    const auto no = static_cast<std::ptrdiff_t>(it->second.size()) - yes;
    if (yes == no) continue;
    const bool knows = yes > no;
    if (t.human_override != knows) {
      t.human_override = knows;
      ++changed;
    }
  }
  return changed;
}

void write_review_worksheet(const std::filesystem::path& path,
                            const std::vector<ContaminationTag>& tags,
                            const std::vector<corpus::BuzzwordEntry>& corpus) {
  auto clean = [](std::string s) {
    for (auto& c : s)
      if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return s;
  };
  std::string out = "word\tbackbone\tprobe_sa\tprobe_sc\tstatus\tprobe_definition\tgold_definition\n";
  for (const auto& t : tags) {
    const auto* e = corpus::find_entry(corpus, t.word);
    out += clean(t.word) + "\t" + t.backbone_id + "\t" + std::to_string(t.probe_sa) + "\t" +
           std::to_string(t.probe_sc) + "\t" + to_string(t.status) + "\t" +
           clean(t.probe_definition) + "\t" + (e ? clean(e->definition) : std::string()) + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace buzzdef::judge
