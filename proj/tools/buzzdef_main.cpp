// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "buzzdef/agreement.hpp"
#include "buzzdef/benchmark.hpp"
#include "buzzdef/corpus.hpp"
#include "buzzdef/embedding.hpp"
#include "buzzdef/external_adapter.hpp"
#include "buzzdef/humaneval.hpp"
#include "buzzdef/humaneval_server.hpp"
#include "buzzdef/judge.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/metrics.hpp"
#include "buzzdef/report.hpp"
#include "buzzdef/selectors.hpp"
#include "buzzdef/text.hpp"
#include "buzzdef/waus.hpp"

namespace fs = std::filesystem;
using namespace buzzdef;

namespace {

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<corpus::BuzzwordEntry> read_corpus(const fs::path& p) {
  auto loaded = corpus::load_corpus(p);
  for (const auto& d : loaded.rejected)
    spdlog::warn("{}:{}: rejected{}{}: {}", p.string(), d.line, d.word.empty() ? "" : " ", d.word, d.message);
  return std::move(loaded.entries);
}

std::vector<std::string> read_word_list(const fs::path& p) {
  std::vector<std::string> out;
  for_each_line(p, [&](std::size_t, std::string_view raw) {
    auto w = text::trim(raw);
    if (!w.empty() && w[0] != '#') out.push_back(std::move(w));
  });
  return out;
}

// Gateway from a config file, or echo backbones for offline dry runs.
llm::GatewayConfig gateway_config(const std::string& path, const std::vector<std::string>& dry_run_backbones) {
  if (!path.empty()) return llm::load_gateway_config(path);
  if (dry_run_backbones.empty()) throw std::invalid_argument("--gateway is required (or --dry-run)");
  llm::GatewayConfig cfg;
  for (const auto& id : dry_run_backbones) {
    llm::BackboneConfig b;
    b.id = id;
    b.type = "echo";
    cfg.backbones[id] = b;
  }
  return cfg;
}

std::shared_ptr<embed::EmbeddingProvider> embedder(const std::string& url, const std::string& cache,
                                                   std::size_t hash_dim) {
  std::shared_ptr<embed::EmbeddingProvider> inner;
  if (!url.empty()) {
    inner = std::make_shared<embed::HttpEmbeddingProvider>(url);
  } else if (hash_dim) {
    inner = std::make_shared<embed::HashEmbeddingProvider>(hash_dim);
  } else {
    return nullptr;
  }
  std::optional<fs::path> dir;
  if (!cache.empty()) dir = fs::path(cache);
  return std::make_shared<embed::CachingEmbeddingProvider>(inner, dir);
}

// Everything an experiment config wires in besides the gateway.
struct Wiring {
  std::unique_ptr<llm::Gateway> gateway;
  std::shared_ptr<embed::EmbeddingProvider> embed;
  std::unique_ptr<waus::WausScorer> scorer;
  std::unique_ptr<seg::Lexicon> lexicon;
  std::unique_ptr<bench::Environment> env;
  std::vector<corpus::BuzzwordEntry> corpus;
};

Wiring wire(const bench::ExperimentConfig& cfg, bool dry_run) {
  Wiring w;
  std::vector<std::string> dry;
  if (dry_run) {
    dry = cfg.backbones;
    if (!cfg.judge_backbone.empty()) dry.push_back(cfg.judge_backbone);
  }
  w.gateway = std::make_unique<llm::Gateway>(
      gateway_config(dry_run ? std::string() : cfg.gateway_config.value_or(fs::path()).string(), dry));
  w.embed = embedder(cfg.embedding_url.value_or(std::string()),
                     cfg.embedding_cache ? cfg.embedding_cache->string() : std::string(),
                     dry_run ? 768 : 0);
  w.env = std::make_unique<bench::Environment>(*w.gateway);
  w.env->embedder = w.embed.get();
  if (cfg.gdex_dir) w.env->gdex = select::GdexLexicons::load(*cfg.gdex_dir);
  if (cfg.waus_head) {
    if (!w.embed) throw std::invalid_argument("waus_head needs embedding_url");
    w.scorer = std::make_unique<waus::WausScorer>(waus::WausHead::load(*cfg.waus_head), w.embed);
    w.env->scorer = w.scorer.get();
  }
  if (cfg.lexicon_path) {
    w.lexicon = std::make_unique<seg::Lexicon>(read_word_list(*cfg.lexicon_path));
    w.env->lexicon = w.lexicon.get();
  }
  if (cfg.adapters) w.env->adapters = gen::adapters_from_json(Json::parse(read_file(*cfg.adapters)));
  w.corpus = read_corpus(cfg.corpus_path);
  if (cfg.tags_path) {
    const auto tags = judge::load_tags(*cfg.tags_path);
    w.env->splits = judge::split_by_contamination(tags, w.corpus);
    if (!tags.empty()) w.env->contamination_rule = judge::to_string(tags.front().rule);
  }
  return w;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  for (const auto& part : text::split(csv, ',')) {
    const auto t = text::trim(part);
    if (!t.empty()) out.push_back(static_cast<std::size_t>(std::stoul(t)));
  }
  return out;
}

std::vector<Json> read_rows(const fs::path& p) { return read_jsonl(p); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"buzzdef: buzzword definition benchmark harness"};
  app.require_subcommand(1);
  app.add_flag_callback("-v,--verbose", [] { spdlog::set_level(spdlog::level::debug); }, "Debug logging")
      ->trigger_on_parse();

  // ingest -------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus, optionally drop definitional examples, print stats");
  std::string in_path, out_path, patterns_path;
  bool filter = false;
  ingest->add_option("input", in_path, "Line-delimited corpus")->required();
  ingest->add_option("-o,--output", out_path, "Write the cleaned corpus here");
  ingest->add_flag("--filter-definitional", filter, "Drop examples that define the word outright");
  ingest->add_option("--patterns", patterns_path, "Pattern list, one per line, [BUZZWORD] placeholder");
  ingest->callback([&] {
    auto entries = read_corpus(in_path);
    std::size_t removed = 0, dropped_words = 0;
    if (filter) {
      const auto patterns = patterns_path.empty() ? corpus::default_definitional_patterns() : read_word_list(patterns_path);
      std::vector<corpus::BuzzwordEntry> kept;
      for (const auto& e : entries) {
        auto r = corpus::filter_definitional(e, patterns);
        removed += r.removed.size();
        if (r.valid) {
          kept.push_back(std::move(r.entry));
        } else {
          ++dropped_words;
          spdlog::warn("{}: every example matched a definitional pattern, word dropped", e.word);
        }
      }
      entries = std::move(kept);
    }
    if (!out_path.empty()) corpus::save_corpus(out_path, entries);
    const auto s = corpus::compute_stats(entries);
    print_json({{"corpus_id", corpus::corpus_id(entries)},
                {"n_buzzwords", s.n_buzzwords},
                {"n_examples", s.n_examples},
                {"avg_examples_per_word", s.avg_examples_per_word},
                {"avg_len_description", s.avg_len_description},
                {"avg_len_definition", s.avg_len_definition},
                {"avg_len_examples", s.avg_len_examples},
                {"examples_removed", removed},
                {"words_dropped", dropped_words}});
  });

  // select -------------------------------------------------------------------
  auto* sel = app.add_subcommand("select", "Rank and pick usage examples per buzzword");
  std::string sel_corpus, sel_strategy = "gdex", sel_out, sel_gdex_dir, sel_head, sel_embed_url, sel_embed_cache;
  std::size_t sel_k = 10;
  std::uint64_t sel_seed = 0;
  sel->add_option("corpus", sel_corpus)->required();
  sel->add_option("-s,--strategy", sel_strategy, "all | random | gdex | waus")->capture_default_str();
  sel->add_option("-k", sel_k)->capture_default_str();
  sel->add_option("--seed", sel_seed)->capture_default_str();
  sel->add_option("--gdex-dir", sel_gdex_dir, "Replacement lexicon directory");
  sel->add_option("--waus-head", sel_head, "Trained head checkpoint");
  sel->add_option("--embedding-url", sel_embed_url);
  sel->add_option("--embedding-cache", sel_embed_cache);
  sel->add_option("-o,--output", sel_out)->required();
  sel->callback([&] {
    select::SelectionConfig sc{select::strategy_from_string(sel_strategy), sel_k, sel_seed};
    select::validate(sc);
    const auto lex = sel_gdex_dir.empty() ? select::GdexLexicons::load() : select::GdexLexicons::load(sel_gdex_dir);
    std::unique_ptr<waus::WausScorer> scorer;
    if (sc.strategy == select::Strategy::Waus) {
      auto e = embedder(sel_embed_url, sel_embed_cache, 0);
      if (sel_head.empty() || !e) throw std::invalid_argument("waus needs --waus-head and --embedding-url");
      scorer = std::make_unique<waus::WausScorer>(waus::WausHead::load(sel_head), e);
    }
    std::vector<Json> rows;
    for (const auto& e : read_corpus(sel_corpus)) rows.push_back(select::selection_to_json(e.word, select::select(e, sc, lex, scorer.get())));
    write_jsonl(sel_out, rows);
    print_json({{"selector_fingerprint", select::selector_fingerprint(sc, scorer.get())}, {"words", rows.size()}});
  });

  // waus-build-set -----------------------------------------------------------
  auto* wbs = app.add_subcommand("waus-build-set", "Dictionary positives plus generated negatives");
  std::string wbs_pairs, wbs_gateway, wbs_backbone, wbs_exclude, wbs_out, wbs_sheet, wbs_templates;
  std::size_t wbs_neg = 3, wbs_budget = 50;
  bool wbs_dry = false;
  wbs->add_option("pairs", wbs_pairs, "Dictionary word/example pairs")->required();
  wbs->add_option("--gateway", wbs_gateway);
  wbs->add_option("--backbone", wbs_backbone)->required();
  wbs->add_option("--exclude-corpus", wbs_exclude, "Benchmark corpus whose words must not appear");
  wbs->add_option("--negatives-per-word", wbs_neg)->capture_default_str();
  wbs->add_option("--review-budget", wbs_budget)->capture_default_str();
  wbs->add_option("--template-dir", wbs_templates);
  wbs->add_option("-o,--output", wbs_out)->required();
  wbs->add_option("--worksheet", wbs_sheet, "Review worksheet (TSV)");
  wbs->add_flag("--dry-run", wbs_dry, "Offline echo backbone");
  wbs->callback([&] {
    llm::Gateway gw(gateway_config(wbs_dry ? "" : wbs_gateway, {wbs_backbone}));
    waus::TrainingSetOptions o;
    o.backbone_id = wbs_backbone;
    o.negatives_per_word = wbs_neg;
    o.review_budget = wbs_budget;
    if (!wbs_templates.empty()) o.template_dir = fs::path(wbs_templates);
    if (!wbs_exclude.empty())
      for (const auto& e : read_corpus(wbs_exclude)) o.excluded_words.insert(e.word);
    const auto set = waus::build_training_set(waus::load_dictionary_pairs(wbs_pairs), gw, o);
    waus::save_examples(wbs_out, set.examples);
    if (!wbs_sheet.empty()) {
      std::string tsv = "word\tsentence\tp_positive\tlabel\n";
      for (const auto& r : set.worksheet) tsv += r.word + "\t" + r.sentence + "\t" + std::to_string(r.p_positive) + "\t\n";
      write_file_atomic(wbs_sheet, tsv);
    }
    for (const auto& w : set.warnings) spdlog::warn("{}", w);
    print_json({{"positives", set.n_positive}, {"negatives", set.n_negative}, {"duplicates_dropped", set.duplicates_dropped}});
  });

  // waus-train ---------------------------------------------------------------
  auto* wt = app.add_subcommand("waus-train", "Train the usage scorer head on frozen sentence embeddings");
  std::string wt_examples, wt_val, wt_url, wt_cache, wt_out;
  std::size_t wt_hash = 0;
  waus::TrainConfig tc;
  wt->add_option("examples", wt_examples)->required();
  wt->add_option("--validation", wt_val);
  wt->add_option("--embedding-url", wt_url);
  wt->add_option("--embedding-cache", wt_cache);
  wt->add_option("--hash-embeddings", wt_hash, "Offline pseudo-embeddings of this dimension");
  wt->add_option("--epochs", tc.epochs)->capture_default_str();
  wt->add_option("--lr", tc.learning_rate)->capture_default_str();
  wt->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  wt->add_option("--batch-size", tc.batch_size)->capture_default_str();
  wt->add_option("--dropout", tc.dropout)->capture_default_str();
  wt->add_option("--seed", tc.seed)->capture_default_str();
  wt->add_option("-o,--output", wt_out)->required();
  wt->callback([&] {
    auto e = embedder(wt_url, wt_cache, wt_hash);
    if (!e) throw std::invalid_argument("--embedding-url or --hash-embeddings required");
    if (wt_hash) tc.dims.input = wt_hash;
    const auto val = wt_val.empty() ? std::vector<waus::WausExample>{} : waus::load_examples(wt_val);
    const auto r = waus::train_on_examples(waus::load_examples(wt_examples), tc, *e, val);
    r.head.save(wt_out);
    Json log = Json::array();
    for (const auto& l : r.log) {
      Json j{{"epoch", l.epoch}, {"train_loss", l.train_loss}, {"eval_loss", l.eval_loss}, {"accuracy", l.accuracy}};
      if (l.val_accuracy) j["val_accuracy"] = *l.val_accuracy;
      log.push_back(j);
    }
    print_json({{"digest", r.head.digest()}, {"positives", r.n_positive}, {"negatives", r.n_negative}, {"epochs", log}});
  });

  // waus-score ---------------------------------------------------------------
  auto* ws = app.add_subcommand("waus-score", "Score sentences with a trained head");
  std::string ws_head, ws_url, ws_cache, ws_word;
  std::vector<std::string> ws_sentences;
  ws->add_option("--head", ws_head)->required();
  ws->add_option("--embedding-url", ws_url)->required();
  ws->add_option("--embedding-cache", ws_cache);
  ws->add_option("--word", ws_word)->required();
  ws->add_option("sentences", ws_sentences)->required();
  ws->callback([&] {
    waus::WausScorer s(waus::WausHead::load(ws_head), embedder(ws_url, ws_cache, 0));
    const auto scores = s.score(ws_sentences, ws_word);
    Json out = Json::array();
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({{"sentence", ws_sentences[i]}, {"p_positive", scores[i]}});
    print_json(out);
  });

  // run / ablate-aspects / volume ---------------------------------------------
  std::string cfg_path, sizes_csv = "1,2,3,4,5,6", ks_csv = "1,3,5,10";
  bool dry_run = false;
  std::size_t sample_cap = 0;
  auto add_cfg = [&](CLI::App* c) {
    c->add_option("config", cfg_path, "Experiment config (JSON)")->required();
    c->add_flag("--dry-run", dry_run, "Echo backbones and hash embeddings, no network");
  };
  auto* run = app.add_subcommand("run", "Run every (method, backbone) cell of an experiment");
  add_cfg(run);
  run->callback([&] {
    const auto cfg = bench::load_config(cfg_path);
    auto w = wire(cfg, dry_run);
    const auto recs = bench::run_grid(cfg, *w.env, w.corpus);
    const auto r = report::write_report(recs, cfg.output_dir);
    std::cout << r.markdown;
  });
  auto* abl = app.add_subcommand("ablate-aspects", "RESS over aspect subsets of each size");
  add_cfg(abl);
  abl->add_option("--sizes", sizes_csv)->capture_default_str();
  abl->add_option("--sample-cap", sample_cap, "Sample at most this many subsets per size");
  abl->callback([&] {
    const auto cfg = bench::load_config(cfg_path);
    auto w = wire(cfg, dry_run);
    std::optional<std::size_t> cap;
    if (sample_cap) cap = sample_cap;
    Json out = Json::array();
    for (const auto& p : bench::ablate_aspects(cfg, *w.env, w.corpus, parse_sizes(sizes_csv), cap)) out.push_back(bench::to_json(p));
    write_file_atomic(cfg.output_dir / "ablation.json", out.dump(2) + "\n");
    print_json(out);
  });
  auto* vol = app.add_subcommand("volume", "Metrics as a function of the number of selected examples");
  add_cfg(vol);
  vol->add_option("--ks", ks_csv)->capture_default_str();
  vol->callback([&] {
    const auto cfg = bench::load_config(cfg_path);
    auto w = wire(cfg, dry_run);
    Json out = Json::array();
    for (const auto& p : bench::volume_curve(cfg, *w.env, w.corpus, parse_sizes(ks_csv))) out.push_back(bench::to_json(p));
    write_file_atomic(cfg.output_dir / "volume.json", out.dump(2) + "\n");
    print_json(out);
  });

  // report -------------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "Merge run records into one table");
  std::vector<std::string> rep_dirs;
  std::string rep_out;
  rep->add_option("runs", rep_dirs, "Run directories")->required();
  rep->add_option("-o,--output", rep_out);
  rep->callback([&] {
    std::vector<fs::path> dirs(rep_dirs.begin(), rep_dirs.end());
    const auto recs = report::load_records(dirs);
    const auto r = rep_out.empty() ? report::render_report(recs) : report::write_report(recs, rep_out);
    std::cout << r.markdown;
  });

  // diversity ----------------------------------------------------------------
  auto* div = app.add_subcommand("diversity", "1 - BERTScore between RESS aspect candidates");
  std::vector<std::string> div_dirs;
  std::string div_url, div_cache;
  div->add_option("runs", div_dirs)->required();
  div->add_option("--embedding-url", div_url)->required();
  div->add_option("--embedding-cache", div_cache);
  div->callback([&] {
    const auto recs = report::load_records(std::vector<fs::path>(div_dirs.begin(), div_dirs.end()));
    auto e = embedder(div_url, div_cache, 0);
    const auto dm = bench::aspect_diversity(recs, *e);
    Json m = Json::object();
    for (Eigen::Index a = 0; a < dm.value.rows(); ++a)
      for (Eigen::Index b = 0; b < dm.value.cols(); ++b)
        m[dm.labels[static_cast<std::size_t>(a)]][dm.labels[static_cast<std::size_t>(b)]] = dm.value(a, b);
    print_json({{"matrix", m}, {"skipped_pairs", dm.skipped_pairs}});
  });

  // score --------------------------------------------------------------------
  auto* sco = app.add_subcommand("score", "BLEU, ROUGE-L and BERTScore for {word, candidate, reference} rows");
  std::string sco_in, sco_url, sco_cache, sco_lex;
  sco->add_option("pairs", sco_in)->required();
  sco->add_option("--embedding-url", sco_url, "Enables BERTScore");
  sco->add_option("--embedding-cache", sco_cache);
  sco->add_option("--lexicon", sco_lex, "Word list; switches to word tokens");
  sco->callback([&] {
    std::vector<metrics::PairInput> pairs;
    for (const auto& j : read_rows(sco_in))
      pairs.push_back({j.at("word").get<std::string>(), j.at("candidate").get<std::string>(), j.at("reference").get<std::string>()});
    metrics::MetricOptions o;
    std::unique_ptr<seg::Lexicon> lex;
    if (!sco_lex.empty()) {
      lex = std::make_unique<seg::Lexicon>(read_word_list(sco_lex));
      o.scheme = metrics::Scheme::LexiconWord;
      o.lexicon = lex.get();
    }
    auto e = embedder(sco_url, sco_cache, 0);
    o.with_bertscore = static_cast<bool>(e);
    const auto r = metrics::score_pairs(pairs, o, e.get());
    for (const auto& w : r.warnings) spdlog::warn("{}", w);
    Json rows = Json::array();
    for (const auto& p : r.pairs) rows.push_back(metrics::to_json(p));
    print_json({{"bleu", r.bleu_mean},
                {"rouge_l", r.rouge_l_mean},
                {"corpus_bleu", r.corpus_bleu},
                {"bertscore", r.bertscore_mean ? Json(*r.bertscore_mean) : Json(nullptr)},
                {"pairs", rows}});
  });

  // judge --------------------------------------------------------------------
  auto* jud = app.add_subcommand("judge", "Score {word, predicted, gold} rows with the judge template");
  std::string jud_in, jud_gateway, jud_backbone, jud_out;
  bool jud_dry = false;
  jud->add_option("pairs", jud_in)->required();
  jud->add_option("--gateway", jud_gateway);
  jud->add_option("--judge-backbone", jud_backbone);
  jud->add_option("-o,--output", jud_out)->required();
  jud->add_flag("--dry-run", jud_dry);
  jud->callback([&] {
    llm::Gateway gw(gateway_config(jud_dry ? "" : jud_gateway, {jud_backbone.empty() ? "echo" : jud_backbone}));
    judge::JudgeOptions o;
    o.judge_backbone = jud_backbone.empty() ? judge::default_judge_backbone(gw.config()) : jud_backbone;
    std::vector<Json> out;
    std::size_t excluded = 0;
    for (const auto& j : read_rows(jud_in)) {
      const auto word = j.at("word").get<std::string>();
      try {
        out.push_back(judge::to_json(judge::judge_definition(j.at("predicted").get<std::string>(),
                                                             j.at("gold").get<std::string>(), word, gw, o)));
      } catch (const judge::JudgeError& e) {
        ++excluded;
        spdlog::warn("{}: verdict excluded: {}", word, e.what());
      }
    }
    write_jsonl(jud_out, out);
    print_json({{"judged", out.size()}, {"excluded", excluded}, {"judge_backbone", o.judge_backbone}});
  });

  // contamination ------------------------------------------------------------
  auto* con = app.add_subcommand("contamination", "Probe each backbone and tag words seen or unseen");
  std::string con_corpus, con_gateway, con_judge, con_rule = "min", con_overrides, con_out, con_sheet;
  std::vector<std::string> con_backbones;
  int con_threshold = judge::kDefaultThreshold;
  std::size_t con_workers = 4;
  bool con_dry = false;
  con->add_option("corpus", con_corpus)->required();
  con->add_option("--gateway", con_gateway);
  con->add_option("-b,--backbone", con_backbones)->required();
  con->add_option("--judge-backbone", con_judge);
  con->add_option("--rule", con_rule, "min | mean | sa-only")->capture_default_str();
  con->add_option("--threshold", con_threshold)->capture_default_str();
  con->add_option("--overrides", con_overrides, "Directory of reviewer vote files");
  con->add_option("--workers", con_workers)->capture_default_str();
  con->add_option("-o,--output", con_out, "Tags (JSONL)")->required();
  con->add_option("--worksheet", con_sheet, "Review worksheet (TSV)");
  con->add_flag("--dry-run", con_dry);
  con->callback([&] {
    const auto corpus = read_corpus(con_corpus);
    auto dry = con_backbones;
    if (!con_judge.empty()) dry.push_back(con_judge);
    llm::Gateway gw(gateway_config(con_dry ? "" : con_gateway, dry));
    std::vector<judge::ContaminationTag> tags;
    std::map<std::string, std::set<std::string>> und;
    for (const auto& b : con_backbones) {
      judge::ProbeOptions o;
      o.backbone_id = b;
      o.rule = judge::rule_from_string(con_rule);
      o.threshold = con_threshold;
      o.judge.judge_backbone = con_judge.empty() ? judge::default_judge_backbone(gw.config()) : con_judge;
      auto batch = judge::probe_corpus(corpus, gw, o, con_workers);
      tags.insert(tags.end(), batch.tags.begin(), batch.tags.end());
      for (const auto& [w, why] : batch.undetermined) und[b].insert(w);
    }
    std::size_t changed = 0;
    if (!con_overrides.empty()) changed = judge::apply_overrides(tags, judge::load_override_votes(con_overrides));
    judge::save_tags(con_out, tags);
    if (!con_sheet.empty()) judge::write_review_worksheet(con_sheet, tags, corpus);
    Json summary = Json::object();
    for (const auto& [b, s] : judge::split_by_contamination(tags, corpus, und))
      summary[b] = {{"seen", s.seen.size()}, {"unseen", s.unseen.size()}, {"undetermined", s.undetermined.size()}};
    print_json({{"splits", summary}, {"overrides_applied", changed}, {"rule", con_rule}});
  });

  // humaneval ----------------------------------------------------------------
  auto* hc = app.add_subcommand("humaneval-create", "Start a pairwise session from two run records");
  std::string hc_id, hc_a, hc_b, hc_corpus, hc_log;
  std::vector<std::string> hc_annotators;
  std::size_t hc_sample = 100;
  std::uint64_t hc_seed = 0;
  hc->add_option("--session-id", hc_id)->required();
  hc->add_option("--run-a", hc_a, "Run directory of the first method")->required();
  hc->add_option("--run-b", hc_b, "Run directory of the second method")->required();
  hc->add_option("--corpus", hc_corpus)->required();
  hc->add_option("--sample", hc_sample)->capture_default_str();
  hc->add_option("--seed", hc_seed)->capture_default_str();
  hc->add_option("--annotator", hc_annotators)->required();
  hc->add_option("--log", hc_log)->required();
  hc->callback([&] {
    human::SessionSpec spec;
    spec.session_id = hc_id;
    spec.sample = hc_sample;
    spec.seed = hc_seed;
    spec.annotators = hc_annotators;
    auto fill = [](const std::string& dir, std::string& method, std::map<std::string, std::string>& defs) {
      const auto rec = report::load_records({fs::path(dir)}).at(0);
      method = rec.method;
      for (const auto& r : rec.rows)
        if (r.generated) defs[r.word] = r.generated->definition;
    };
    fill(hc_a, spec.method_a, spec.definitions_a);
    fill(hc_b, spec.method_b, spec.definitions_b);
    for (const auto& e : read_corpus(hc_corpus)) spec.gold[e.word] = e.definition;
    const auto s = human::Session::create(spec, hc_log);
    print_json({{"session_id", s->id()}, {"items", s->items().size()}});
  });

  auto* srv = app.add_subcommand("serve-humaneval", "Serve pairwise sessions over HTTP");
  std::string srv_dir, srv_host = "127.0.0.1";
  int srv_port = 8080;
  srv->add_option("--sessions-dir", srv_dir)->required();
  srv->add_option("--host", srv_host)->capture_default_str();
  srv->add_option("--port", srv_port)->capture_default_str();
  srv->callback([&] {
    fs::create_directories(srv_dir);
    human::HumanEvalServer server(srv_dir);
    for (const auto& e : fs::directory_iterator(srv_dir))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") server.add_session(human::Session::open(e.path()));
    if (!server.bind(srv_host, srv_port)) throw std::runtime_error("cannot bind " + srv_host + ":" + std::to_string(srv_port));
    spdlog::info("serving on {}:{}", srv_host, srv_port);
    server.serve();
  });

  auto* agr = app.add_subcommand("agreement", "Krippendorff alpha and raw agreement for a ratings table");
  std::string agr_in, agr_level = "nominal", agr_dim = "ratings";
  agr->add_option("ratings", agr_in, "JSON array of annotator rows, null for missing")->required();
  agr->add_option("--level", agr_level, "nominal | ordinal")->capture_default_str();
  agr->add_option("--dimension", agr_dim)->capture_default_str();
  agr->callback([&] {
    const auto j = Json::parse(read_file(agr_in));
    agree::Ratings r;
    for (const auto& row : j) {
      std::vector<std::optional<int>> cells;
      for (const auto& c : row) cells.push_back(c.is_null() ? std::nullopt : std::optional<int>(c.get<int>()));
      r.push_back(std::move(cells));
    }
    print_json(agree::to_json(agree::agreement_report(agr_dim, r, agree::level_from_string(agr_level))));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
