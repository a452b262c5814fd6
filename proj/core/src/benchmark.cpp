// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "buzzdef/digest.hpp"
#include "buzzdef/random.hpp"
#include "buzzdef/templates.hpp"

namespace buzzdef::bench {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<fs::path> opt_path(const Json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  fs::path p = j[key].get<std::string>();
  if (p.empty()) return std::nullopt;
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::vector<std::string> aspect_codes(const std::vector<gen::AspectId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(gen::aspect(id).code);
  return out;
}

std::string scheme_name(metrics::Scheme s) { return s == metrics::Scheme::Char ? "char" : "word"; }

std::string templates_digest(const std::optional<fs::path>& dir) {
  std::string all;
  for (const char* name : {"dp_no_ugc.txt", "dp.txt", "cot.txt", "aspect.txt", "ensemble.txt",
                           "examples_oneshot.txt", "judge.txt"}) {
    all += tmpl::load_template(dir, name);
    all += '\0';
  }
  return sha256_hex(all).substr(0, 16);
}

bool is_ress(const std::string& method) { return method == "ress"; }

}  // namespace

ExperimentConfig config_from_json(const Json& j, const fs::path& base) {
  if (!j.is_object()) throw BenchmarkError("experiment config must be a record");
  ExperimentConfig c;
  if (auto p = opt_path(j, "corpus", base)) c.corpus_path = *p;
  c.methods = j.value("methods", std::vector<std::string>{});
  c.backbones = j.value("backbones", std::vector<std::string>{});
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("selector")) {
    c.selector = select::selection_config_from_json(j["selector"]);
    if (!j["selector"].contains("seed")) c.selector.seed = c.seed;
  } else {
    c.selector.seed = c.seed;
  }
  c.judge_backbone = j.value("judge_backbone", std::string());
  if (j.contains("metrics")) {
    c.metrics.bertscore = j["metrics"].value("bertscore", c.metrics.bertscore);
    c.metrics.judge = j["metrics"].value("judge", c.metrics.judge);
  }
  if (j.contains("aspects")) {
    const auto& a = j["aspects"];
    if (a.is_string()) {
      c.aspects = gen::parse_aspect_list(a.get<std::string>());
    } else {
      std::string csv;
      for (const auto& x : a) csv += x.get<std::string>() + ",";
      c.aspects = gen::parse_aspect_list(csv);
    }
  }
  c.ensemble_with_reasons = j.value("ensemble_with_reasons", false);
  const auto scheme = j.value("scheme", std::string("char"));
  if (scheme == "char") {
    c.scheme = metrics::Scheme::Char;
  } else if (scheme == "word") {
    c.scheme = metrics::Scheme::LexiconWord;
  } else {
    throw BenchmarkError("unknown token scheme: " + scheme);
  }
  if (auto p = opt_path(j, "output_dir", base)) c.output_dir = *p;
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("llm_seed")) {
    if (j["llm_seed"].is_null()) {
      c.llm_seed.reset();
    } else {
      c.llm_seed = j["llm_seed"].get<std::int64_t>();
    }
  }
  c.workers = j.value("workers", c.workers);
  if (c.workers == 0) throw BenchmarkError("workers must be positive");
  c.template_dir = opt_path(j, "template_dir", base);
  c.gateway_config = opt_path(j, "gateway", base);
  c.tags_path = opt_path(j, "tags", base);
  if (j.contains("embedding_url") && j["embedding_url"].is_string())
    c.embedding_url = j["embedding_url"].get<std::string>();
  c.embedding_cache = opt_path(j, "embedding_cache", base);
  c.waus_head = opt_path(j, "waus_head", base);
  c.gdex_dir = opt_path(j, "gdex_dir", base);
  c.lexicon_path = opt_path(j, "lexicon", base);
  c.adapters = opt_path(j, "adapters", base);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  Json j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw BenchmarkError("config is not valid JSON: " + path.string());
  return config_from_json(j, path.parent_path());
}

Json to_json(const ExperimentConfig& c) {
  Json j = normalized(c);
  j["methods"] = c.methods;
  j["backbones"] = c.backbones;
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  j["temperature"] = c.temperature;
  auto put = [&](const char* key, const std::optional<fs::path>& p) {
    if (p) j[key] = p->string();
  };
  put("gateway", c.gateway_config);
  put("tags", c.tags_path);
  if (c.embedding_url) j["embedding_url"] = *c.embedding_url;
  put("embedding_cache", c.embedding_cache);
  put("waus_head", c.waus_head);
  put("gdex_dir", c.gdex_dir);
  put("lexicon", c.lexicon_path);
  put("adapters", c.adapters);
  return j;
}

Json normalized(const ExperimentConfig& c) {
  auto methods = c.methods;
  auto backbones = c.backbones;
  std::sort(methods.begin(), methods.end());
  std::sort(backbones.begin(), backbones.end());
  Json sel = select::to_json(c.selector);
  return Json{{"corpus", c.corpus_path.string()},
              {"methods", methods},
              {"backbones", backbones},
              {"selector", sel},
              {"judge_backbone", c.judge_backbone},
              {"metrics", {{"bertscore", c.metrics.bertscore}, {"judge", c.metrics.judge}}},
              {"aspects", aspect_codes(c.aspects)},
              {"ensemble_with_reasons", c.ensemble_with_reasons},
              {"scheme", scheme_name(c.scheme)},
              {"seed", c.seed},
              {"temperature", fmt_double(c.temperature)},
              {"llm_seed", c.llm_seed ? Json(*c.llm_seed) : Json(nullptr)},
              {"template_dir", c.template_dir ? c.template_dir->string() : std::string()}};
}

std::string config_fingerprint(const ExperimentConfig& c) {
  return sha256_hex(dump_line(normalized(c))).substr(0, 16);
}

void validate(const ExperimentConfig& cfg, const Environment& env) {
  if (cfg.methods.empty()) throw BenchmarkError("no methods configured");
  if (cfg.backbones.empty()) throw BenchmarkError("no backbones configured");
  const auto& builtin = gen::builtin_methods();
  for (const auto& m : cfg.methods) {
    const bool known = std::find(builtin.begin(), builtin.end(), m) != builtin.end() ||
                       env.adapters.count(m);
    if (!known) throw BenchmarkError("method '" + m + "' is neither built in nor has an adapter");
  }
  for (const auto& b : cfg.backbones)
    if (!env.gateway.has_backbone(b)) throw BenchmarkError("backbone '" + b + "' is not configured");
  if (!cfg.judge_backbone.empty() && !env.gateway.has_backbone(cfg.judge_backbone))
    throw BenchmarkError("judge backbone '" + cfg.judge_backbone + "' is not configured");
  if (cfg.metrics.bertscore && !env.embedder)
    throw BenchmarkError("bertscore requested without an embedding provider");
  if (cfg.selector.strategy == select::Strategy::Waus && !env.scorer)
    throw BenchmarkError("waus selector requested without a trained head");
  if (cfg.scheme == metrics::Scheme::LexiconWord && !env.lexicon)
    throw BenchmarkError("word scheme requested without a lexicon");
  if (cfg.aspects.empty()) throw BenchmarkError("aspect subset is empty");
  select::validate(cfg.selector);
}

// Rows and aggregates -----------------------------------------------------

Json to_json(const Row& r) {
  Json j{{"word", r.word},
         {"selection", r.selection},
         {"short_of_k", r.short_of_k},
         {"generated", r.generated ? gen::to_json(*r.generated) : Json(nullptr)},
         {"metrics", r.metrics ? metrics::to_json(*r.metrics) : Json(nullptr)},
         {"verdict", r.verdict ? judge::to_json(*r.verdict) : Json(nullptr)},
         {"errors", r.errors}};
  if (!r.split.empty()) j["split"] = r.split;
  return j;
}

Row row_from_json(const Json& j) {
  Row r;
  r.word = j.at("word").get<std::string>();
  r.selection = j.value("selection", std::vector<std::size_t>{});
  r.short_of_k = j.value("short_of_k", false);
  if (j.contains("generated") && j["generated"].is_object()) r.generated = gen::generated_from_json(j["generated"]);
  if (j.contains("metrics") && j["metrics"].is_object()) r.metrics = metrics::pair_metrics_from_json(j["metrics"]);
  if (j.contains("verdict") && j["verdict"].is_object()) r.verdict = judge::verdict_from_json(j["verdict"]);
  r.split = j.value("split", std::string());
  r.errors = j.value("errors", std::vector<std::string>{});
  return r;
}

Aggregate aggregate(const std::vector<Row>& rows, const std::string* split) {
  std::vector<const Row*> sorted;
  for (const auto& r : rows)
    if (!split || r.split == *split) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const Row* a, const Row* b) { return a->word < b->word; });
  Aggregate a;
  double bert = 0.0, sa = 0.0, sc = 0.0;
  for (const auto* r : sorted) {
    ++a.n_rows;
    if (r->metrics) {
      ++a.n_generated;
      a.bleu += r->metrics->bleu;
      a.rouge_l += r->metrics->rouge_l;
      if (r->metrics->bertscore_f) {
        ++a.n_bertscore;
        bert += *r->metrics->bertscore_f;
      }
    }
    if (r->verdict) {
      ++a.n_judged;
      sa += r->verdict->sa;
      sc += r->verdict->sc;
    }
  }
  if (a.n_generated) {
    a.bleu /= static_cast<double>(a.n_generated);
    a.rouge_l /= static_cast<double>(a.n_generated);
  }
  if (a.n_bertscore) a.bertscore = bert / static_cast<double>(a.n_bertscore);
  if (a.n_judged) {
    a.sa_mean = sa / static_cast<double>(a.n_judged);
    a.sc_mean = sc / static_cast<double>(a.n_judged);
  }
  return a;
}

Json to_json(const Aggregate& a) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"n_rows", a.n_rows},         {"n_generated", a.n_generated}, {"bleu", a.bleu},
              {"rouge_l", a.rouge_l},       {"n_bertscore", a.n_bertscore}, {"bertscore", opt(a.bertscore)},
              {"n_judged", a.n_judged},     {"sa_mean", opt(a.sa_mean)},    {"sc_mean", opt(a.sc_mean)}};
}

Aggregate aggregate_from_json(const Json& j) {
  auto opt = [&](const char* k) -> std::optional<double> {
    if (j.contains(k) && j[k].is_number()) return j[k].get<double>();
    return std::nullopt;
  };
  Aggregate a;
  a.n_rows = j.at("n_rows").get<std::size_t>();
  a.n_generated = j.at("n_generated").get<std::size_t>();
  a.bleu = j.at("bleu").get<double>();
  a.rouge_l = j.at("rouge_l").get<double>();
  a.n_bertscore = j.value("n_bertscore", std::size_t{0});
  a.bertscore = opt("bertscore");
  a.n_judged = j.value("n_judged", std::size_t{0});
  a.sa_mean = opt("sa_mean");
  a.sc_mean = opt("sc_mean");
  return a;
}

namespace {

bool close_enough(double a, double b) { return std::fabs(a - b) <= 1e-9; }

bool same(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || close_enough(*a, *b);
}

bool same(const Aggregate& a, const Aggregate& b) {
  return a.n_rows == b.n_rows && a.n_generated == b.n_generated && a.n_judged == b.n_judged &&
         a.n_bertscore == b.n_bertscore && close_enough(a.bleu, b.bleu) &&
         close_enough(a.rouge_l, b.rouge_l) && same(a.bertscore, b.bertscore) &&
         same(a.sa_mean, b.sa_mean) && same(a.sc_mean, b.sc_mean);
}

const std::string kSeen = "seen";
const std::string kUnseen = "unseen";

}  // namespace

Json to_json(const RunRecord& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  Json j{{"fingerprint", r.fingerprint},
         {"corpus_id", r.corpus_id},
         {"method", r.method},
         {"backbone", r.backbone},
         {"selector", r.selector},
         {"selector_fingerprint", r.selector_fingerprint},
         {"aspects", r.aspects},
         {"judge_backbone", r.judge_backbone},
         {"aggregates", {{"overall", to_json(r.overall)}}},
         {"contamination_rule", r.contamination_rule},
         {"wall_seconds", r.wall_seconds},
         {"provider_calls", r.provider_calls},
         {"generation_calls", r.generation_calls},
         {"judge_calls", r.judge_calls},
         {"rows", rows}};
  if (r.seen) j["aggregates"]["seen"] = to_json(*r.seen);
  if (r.unseen) j["aggregates"]["unseen"] = to_json(*r.unseen);
  return j;
}

RunRecord record_from_json(const Json& j) {
  RunRecord r;
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.corpus_id = j.at("corpus_id").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.backbone = j.at("backbone").get<std::string>();
  r.selector = j.value("selector", Json::object());
  r.selector_fingerprint = j.value("selector_fingerprint", std::string());
  r.aspects = j.value("aspects", std::vector<std::string>{});
  r.judge_backbone = j.value("judge_backbone", std::string());
  r.contamination_rule = j.value("contamination_rule", std::string());
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.provider_calls = j.value("provider_calls", std::uint64_t{0});
  r.generation_calls = j.value("generation_calls", std::uint64_t{0});
  r.judge_calls = j.value("judge_calls", std::uint64_t{0});
  for (const auto& row : j.at("rows")) r.rows.push_back(row_from_json(row));
  const auto& ag = j.at("aggregates");
  r.overall = aggregate_from_json(ag.at("overall"));
  if (ag.contains("seen")) r.seen = aggregate_from_json(ag["seen"]);
  if (ag.contains("unseen")) r.unseen = aggregate_from_json(ag["unseen"]);

  if (!same(r.overall, aggregate(r.rows)))
    throw BenchmarkError("record " + r.fingerprint + ": overall aggregates do not match its rows");
  if (r.seen && !same(*r.seen, aggregate(r.rows, &kSeen)))
    throw BenchmarkError("record " + r.fingerprint + ": seen aggregates do not match its rows");
  if (r.unseen && !same(*r.unseen, aggregate(r.rows, &kUnseen)))
    throw BenchmarkError("record " + r.fingerprint + ": unseen aggregates do not match its rows");
  return r;
}

RunRecord load_record(const fs::path& report_json) {
  Json j = Json::parse(read_file(report_json), nullptr, false);
  if (j.is_discarded()) throw BenchmarkError("unreadable record: " + report_json.string());
  return record_from_json(j);
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  const std::size_t t = std::max<std::size_t>(1, std::min(workers, n));
  if (t == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < t; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first) std::rethrow_exception(first);
}

std::string cell_fingerprint(const ExperimentConfig& cfg, const std::string& method,
                             const std::string& backbone, const std::string& corpus_id,
                             const std::string& selector_fp) {
  Json j{{"corpus_id", corpus_id},
         {"method", method},
         {"backbone", backbone},
         {"selector", select::to_json(cfg.selector)},
         {"selector_fingerprint", selector_fp},
         {"judge_backbone", cfg.metrics.judge ? cfg.judge_backbone : std::string()},
         {"metrics", {{"bertscore", cfg.metrics.bertscore}, {"judge", cfg.metrics.judge}}},
         {"scheme", scheme_name(cfg.scheme)},
         {"temperature", fmt_double(cfg.temperature)},
         {"llm_seed", cfg.llm_seed ? Json(*cfg.llm_seed) : Json(nullptr)},
         {"templates", templates_digest(cfg.template_dir)}};
  if (is_ress(method)) {
    j["aspects"] = aspect_codes(cfg.aspects);
    j["ensemble_with_reasons"] = cfg.ensemble_with_reasons;
  }
  return sha256_hex(dump_line(j)).substr(0, 16);
}

namespace {

template <typename T>
std::map<std::string, T> load_stage(const fs::path& path, T (*parse)(const Json&)) {
  std::map<std::string, T> out;
  if (!fs::exists(path)) return out;
  for_each_line(path, [&](std::size_t line_no, std::string_view raw) {
    if (raw.empty()) return;
    Json j = Json::parse(raw, nullptr, false);
    if (j.is_discarded()) {
      // A torn trailing line from an interrupted run is recomputed.
      spdlog::warn("{}:{}: unreadable record skipped", path.string(), line_no);
      return;
    }
    try {
      out.insert_or_assign(j.at("word").get<std::string>(), parse(j));
    } catch (const std::exception& e) {
      spdlog::warn("{}:{}: {}", path.string(), line_no, e.what());
    }
  });
  return out;
}

struct StoredSelection {
  std::vector<std::size_t> indices;
  bool short_of_k = false;
};

StoredSelection selection_from_json(const Json& j) {
  return StoredSelection{j.at("indices").get<std::vector<std::size_t>>(), j.value("short_of_k", false)};
}

gen::GeneratedDefinition generated_parse(const Json& j) { return gen::generated_from_json(j); }
metrics::PairMetrics metrics_parse(const Json& j) { return metrics::pair_metrics_from_json(j); }
judge::JudgeVerdict verdict_parse(const Json& j) { return judge::verdict_from_json(j); }

}  // namespace

RunRecord run_cell(const ExperimentConfig& cfg_in, Environment& env,
                   const std::vector<corpus::BuzzwordEntry>& corpus, const std::string& method,
                   const std::string& backbone) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  if (cfg.metrics.judge && cfg.judge_backbone.empty())
    cfg.judge_backbone = judge::default_judge_backbone(env.gateway.config());

  RunRecord rec;
  rec.corpus_id = corpus::corpus_id(corpus);
  rec.method = method;
  rec.backbone = backbone;
  rec.selector = select::to_json(cfg.selector);
  rec.selector_fingerprint = select::selector_fingerprint(cfg.selector, env.scorer);
  if (is_ress(method)) rec.aspects = aspect_codes(cfg.aspects);
  rec.judge_backbone = cfg.metrics.judge ? cfg.judge_backbone : std::string();
  rec.contamination_rule = env.contamination_rule;
  rec.fingerprint = cell_fingerprint(cfg, method, backbone, rec.corpus_id, rec.selector_fingerprint);

  const fs::path dir = cfg.output_dir / rec.fingerprint;
  fs::create_directories(dir);
  Json cell_cfg = normalized(cfg);
  cell_cfg["cell"] = {{"method", method}, {"backbone", backbone}, {"fingerprint", rec.fingerprint}};
  write_file_atomic(dir / "config.json", cell_cfg.dump(2) + "\n");

  const auto sel_path = dir / "selections.jsonl";
  const auto gen_path = dir / "generations.jsonl";
  const auto met_path = dir / "metrics.jsonl";
  const auto ver_path = dir / "verdicts.jsonl";
  auto selections = load_stage<StoredSelection>(sel_path, &selection_from_json);
  auto generations = load_stage<gen::GeneratedDefinition>(gen_path, &generated_parse);
  auto metric_rows = load_stage<metrics::PairMetrics>(met_path, &metrics_parse);
  auto verdicts = load_stage<judge::JudgeVerdict>(ver_path, &verdict_parse);

  gen::GenerationOptions gopts;
  gopts.backbone_id = backbone;
  gopts.template_dir = cfg.template_dir;
  gopts.aspects = cfg.aspects;
  gopts.ensemble_with_reasons = cfg.ensemble_with_reasons;
  gopts.temperature = cfg.temperature;
  gopts.seed = cfg.llm_seed;
  gopts.selector_fingerprint = rec.selector_fingerprint;
  gen::Generator generator(env.gateway, gopts);
  for (const auto& [name, a] : env.adapters) generator.register_adapter(name, a);

  judge::JudgeOptions jopts;
  jopts.judge_backbone = cfg.judge_backbone;
  jopts.template_dir = cfg.template_dir;
  jopts.temperature = cfg.temperature;
  jopts.seed = cfg.llm_seed;

  metrics::MetricOptions mopts;
  mopts.scheme = cfg.scheme;
  mopts.lexicon = env.lexicon;

  const std::map<std::string, judge::Split>::const_iterator split_it = env.splits.find(backbone);
  const judge::Split* split = split_it == env.splits.end() ? nullptr : &split_it->second;

  const auto calls_before = env.gateway.stats().provider_calls;
  std::mutex io;
  std::vector<Row> rows(corpus.size());
  parallel_for(corpus.size(), cfg.workers, [&](std::size_t i) {
    const auto& e = corpus[i];
    Row& row = rows[i];
    row.word = e.word;
    if (split) {
      row.split = split->seen.count(e.word) ? kSeen
                  : split->unseen.count(e.word) ? kUnseen
                                                : std::string("undetermined");
    }
    auto lookup = [&](auto& m) {
      std::lock_guard lock(io);
      auto it = m.find(e.word);
      return it == m.end() ? std::nullopt : std::make_optional(it->second);
    };
    auto persist = [&](const fs::path& p, const Json& j) {
      std::lock_guard lock(io);
      append_jsonl(p, j);
    };

    std::vector<std::string> sentences;
    try {
      if (auto s = lookup(selections)) {
        for (auto idx : s->indices) {
          if (idx >= e.examples.size()) throw BenchmarkError("stored selection index out of range");
          sentences.push_back(e.examples[idx]);
        }
        row.selection = s->indices;
        row.short_of_k = s->short_of_k;
      } else {
        const auto sel = select::select(e, cfg.selector, env.gdex, env.scorer);
        sentences = sel.sentences;
        row.selection = sel.indices;
        row.short_of_k = sel.short_of_k;
        persist(sel_path, select::selection_to_json(e.word, sel));
        std::lock_guard lock(io);
        selections[e.word] = StoredSelection{sel.indices, sel.short_of_k};
      }
    } catch (const std::exception& ex) {
      row.errors.push_back(std::string("select: ") + ex.what());
      return;
    }

    try {
      if (auto g = lookup(generations)) {
        row.generated = std::move(*g);
      } else {
        row.generated = generator.run_method(method, e, sentences);
        persist(gen_path, gen::to_json(*row.generated));
      }
    } catch (const std::exception& ex) {
      row.errors.push_back(std::string("generate: ") + ex.what());
      return;
    }

    try {
      if (auto m = lookup(metric_rows)) {
        row.metrics = std::move(*m);
      } else {
        metrics::PairMetrics pm;
        pm.word = e.word;
        const auto c = metrics::tokenize(row.generated->definition, mopts.scheme, mopts.lexicon);
        const auto r = metrics::tokenize(e.definition, mopts.scheme, mopts.lexicon);
        pm.bleu = metrics::bleu(c, {r}, mopts.bleu);
        pm.rouge_l = metrics::rouge_l(c, r);
        if (cfg.metrics.bertscore) {
          try {
            pm.bertscore_f = metrics::bertscore(row.generated->definition, e.definition, *env.embedder).f;
          } catch (const std::exception& ex) {
            row.errors.push_back(std::string("bertscore: ") + ex.what());
          }
        }
        row.metrics = pm;
        if (!cfg.metrics.bertscore || pm.bertscore_f) persist(met_path, metrics::to_json(pm));
      }
    } catch (const std::exception& ex) {
      row.errors.push_back(std::string("metrics: ") + ex.what());
    }

    if (!cfg.metrics.judge) return;
    try {
      if (auto v = lookup(verdicts)) {
        row.verdict = std::move(*v);
      } else {
        row.verdict = judge::judge_definition(row.generated->definition, e.definition, e.word,
                                              env.gateway, jopts);
        persist(ver_path, judge::to_json(*row.verdict));
      }
    } catch (const std::exception& ex) {
      row.errors.push_back(std::string("judge: ") + ex.what());
    }
  });
  rec.provider_calls = env.gateway.stats().provider_calls - calls_before;

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.word < b.word; });
  rec.rows = std::move(rows);

  // Deterministic merge: stage files rewritten in word order.
  std::vector<Json> sel_rows, gen_rows, met_rows, ver_rows;
  for (const auto& r : rec.rows) {
    if (!r.selection.empty() || selections.count(r.word))
      sel_rows.push_back(Json{{"word", r.word}, {"indices", r.selection}, {"short_of_k", r.short_of_k}});
    if (r.generated) {
      gen_rows.push_back(gen::to_json(*r.generated));
      rec.generation_calls += static_cast<std::uint64_t>(r.generated->call_count);
    }
    if (r.metrics && (!cfg.metrics.bertscore || r.metrics->bertscore_f))
      met_rows.push_back(metrics::to_json(*r.metrics));
    if (r.verdict) {
      ver_rows.push_back(judge::to_json(*r.verdict));
      rec.judge_calls += static_cast<std::uint64_t>(r.verdict->calls);
    }
  }
  write_jsonl(sel_path, sel_rows);
  write_jsonl(gen_path, gen_rows);
  write_jsonl(met_path, met_rows);
  write_jsonl(ver_path, ver_rows);

  rec.overall = aggregate(rec.rows);
  if (split) {
    rec.seen = aggregate(rec.rows, &kSeen);
    rec.unseen = aggregate(rec.rows, &kUnseen);
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file_atomic(dir / "report.json", to_json(rec).dump(2) + "\n");

  if (!corpus.empty() && gen_rows.empty()) {
    std::string first;
    for (const auto& r : rec.rows)
      if (!r.errors.empty()) {
        first = r.word + ": " + r.errors.front();
        break;
      }
    throw BenchmarkError("cell " + method + "/" + backbone + ": every buzzword failed (" + first + ")");
  }
  std::size_t failed = 0;
  for (const auto& r : rec.rows)
    if (!r.errors.empty()) ++failed;
  if (failed) spdlog::warn("cell {}/{}: {} of {} buzzwords had errors", method, backbone, failed, rec.rows.size());
  return rec;
}

std::vector<RunRecord> run_grid(const ExperimentConfig& cfg, Environment& env,
                                const std::vector<corpus::BuzzwordEntry>& corpus) {
  validate(cfg, env);
  std::vector<RunRecord> out;
  for (const auto& m : cfg.methods)
    for (const auto& b : cfg.backbones) out.push_back(run_cell(cfg, env, corpus, m, b));
  return out;
}

std::map<std::string, double> headline_metrics(const Aggregate& a) {
  std::map<std::string, double> m{{"bleu", a.bleu}, {"rouge_l", a.rouge_l}};
  if (a.bertscore) m["bertscore"] = *a.bertscore;
  if (a.sa_mean) m["sa_mean"] = *a.sa_mean;
  if (a.sc_mean) m["sc_mean"] = *a.sc_mean;
  return m;
}

std::vector<std::vector<gen::AspectId>> aspect_combinations(std::size_t k) {
  const auto all = gen::all_aspect_ids();
  if (k == 0 || k > all.size()) throw BenchmarkError("aspect combination size must be in 1..6");
  std::vector<std::vector<gen::AspectId>> out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<gen::AspectId> combo;
    for (auto i : idx) combo.push_back(all[i]);
    out.push_back(std::move(combo));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == all.size() - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<AblationPoint> ablate_aspects(const ExperimentConfig& cfg_in, Environment& env,
                                          const std::vector<corpus::BuzzwordEntry>& corpus,
                                          const std::vector<std::size_t>& sizes,
                                          std::optional<std::size_t> sample_cap) {
  ExperimentConfig cfg = cfg_in;
  cfg.methods = {"ress"};
  validate(cfg, env);
  std::vector<AblationPoint> out;
  for (const auto& backbone : cfg.backbones) {
    for (const auto k : sizes) {
      auto combos = aspect_combinations(k);
      if (sample_cap && *sample_cap < combos.size()) {
        if (*sample_cap == 0) throw BenchmarkError("sample cap must be positive");
        DeterministicRng rng(derive_seed(cfg.seed, "ablation-" + std::to_string(k)));
        auto perm = rng.permutation(combos.size());
        perm.resize(*sample_cap);
        std::sort(perm.begin(), perm.end());
        std::vector<std::vector<gen::AspectId>> picked;
        for (auto i : perm) picked.push_back(combos[i]);
        combos = std::move(picked);
      }
      AblationPoint p;
      p.backbone = backbone;
      p.size = k;
      std::vector<std::map<std::string, double>> values;
      for (const auto& combo : combos) {
        ExperimentConfig c = cfg;
        c.aspects = combo;
        const auto rec = run_cell(c, env, corpus, "ress", backbone);
        std::string name;
        for (const auto& code : aspect_codes(combo)) name += (name.empty() ? "" : "+") + code;
        p.combinations.push_back(name);
        p.fingerprints.push_back(rec.fingerprint);
        values.push_back(headline_metrics(rec.overall));
      }
      for (const auto& [metric, unused] : values.front()) {
        std::vector<double> xs;
        for (const auto& v : values) {
          auto it = v.find(metric);
          if (it != v.end()) xs.push_back(it->second);
        }
        if (xs.size() != values.size()) continue;  // metric missing from some run
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        p.mean[metric] = mean;
        p.stddev[metric] = std::sqrt(var);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Json to_json(const AblationPoint& p) {
  return Json{{"backbone", p.backbone},         {"size", p.size},
              {"runs", p.combinations.size()},  {"combinations", p.combinations},
              {"fingerprints", p.fingerprints}, {"mean", p.mean},
              {"std", p.stddev}};
}

std::vector<VolumePoint> volume_curve(const ExperimentConfig& cfg_in, Environment& env,
                                      const std::vector<corpus::BuzzwordEntry>& corpus,
                                      const std::vector<std::size_t>& ks) {
  if (cfg_in.selector.strategy == select::Strategy::All)
    throw BenchmarkError("volume curves need a random or ranked selector");
  if (ks.empty()) throw BenchmarkError("no volumes given");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw BenchmarkError("volumes must be positive");
    if (i && ks[i] <= ks[i - 1]) throw BenchmarkError("volumes must be strictly ascending");
  }
  std::vector<VolumePoint> out;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<std::size_t>>> prev;
  for (const auto k : ks) {
    ExperimentConfig cfg = cfg_in;
    cfg.selector.k = k;
    for (const auto& rec : run_grid(cfg, env, corpus)) {
      VolumePoint p;
      p.k = k;
      p.method = rec.method;
      p.backbone = rec.backbone;
      p.fingerprint = rec.fingerprint;
      p.overall = rec.overall;
      p.seen = rec.seen;
      p.unseen = rec.unseen;
      auto& last = prev[{rec.method, rec.backbone}];
      for (const auto& row : rec.rows) {
        if (row.short_of_k) ++p.n_short;
        auto it = last.find(row.word);
        if (it != last.end() && !row.selection.empty()) {
          const auto& smaller = it->second;
          if (smaller.size() > row.selection.size() ||
              !std::equal(smaller.begin(), smaller.end(), row.selection.begin()))
            throw std::logic_error("selection for " + row.word + " at k=" + std::to_string(k) +
                                   " does not extend the smaller selection");
        }
        if (!row.selection.empty()) last[row.word] = row.selection;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Json to_json(const VolumePoint& p) {
  Json j{{"k", p.k},
         {"method", p.method},
         {"backbone", p.backbone},
         {"fingerprint", p.fingerprint},
         {"overall", to_json(p.overall)},
         {"n_short", p.n_short}};
  if (p.seen) j["seen"] = to_json(*p.seen);
  if (p.unseen) j["unseen"] = to_json(*p.unseen);
  return j;
}

metrics::DiversityMatrix aspect_diversity(const std::vector<RunRecord>& records,
                                          embed::EmbeddingProvider& provider,
                                          const metrics::BertScoreOptions& opts) {
  std::vector<std::map<std::string, std::string>> per_word;
  for (const auto& rec : records) {
    if (!is_ress(rec.method)) continue;
    for (const auto& row : rec.rows) {
      if (!row.generated || !row.generated->aspect_trace) continue;
      std::map<std::string, std::string> defs;
      for (const auto& [code, cand] : *row.generated->aspect_trace) defs[code] = cand.definition;
      per_word.push_back(std::move(defs));
    }
  }
  if (per_word.empty()) throw BenchmarkError("no aspect traces in the given records");
  return metrics::diversity_matrix(per_word, aspect_codes(gen::all_aspect_ids()), provider, opts);
}

}  // namespace buzzdef::bench
