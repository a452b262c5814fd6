// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/report.hpp"

#include <algorithm>
#include <cstdio>

namespace buzzdef::report {

namespace fs = std::filesystem;

std::optional<double> relative_delta(const std::optional<double>& seen,
                                     const std::optional<double>& unseen) {
  if (!seen || !unseen || *seen == 0.0) return std::nullopt;
  return (*unseen - *seen) / *seen * 100.0;
}

namespace {

std::string num(const std::optional<double>& v, int digits = 4) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f%%", *v);
  return buf;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Rendered render_report(const std::vector<bench::RunRecord>& records) {
  if (records.empty()) throw ReportError("no records to report");
  const auto& corpus = records.front().corpus_id;
  for (const auto& r : records)
    if (r.corpus_id != corpus)
      throw ReportError("records come from different corpora (" + corpus + " vs " + r.corpus_id + ")");

  std::vector<const bench::RunRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return std::tie(a->backbone, a->method, a->fingerprint) < std::tie(b->backbone, b->method, b->fingerprint);
  });

  const bool any_split = std::any_of(sorted.begin(), sorted.end(), [](auto* r) { return r->seen.has_value(); });
  std::string rule;
  for (auto* r : sorted)
    if (!r->contamination_rule.empty()) rule = r->contamination_rule;

  Rendered out;
  out.json = Json{{"corpus_id", corpus},
                  {"delta_convention", "(unseen - seen) / seen, percent"},
                  {"contamination_rule", rule},
                  {"rows", Json::array()}};

  std::string md = "# Benchmark report\n\nCorpus `" + corpus + "`.";
  if (any_split) {
    md += " Deltas are (unseen - seen) / seen in percent.";
    if (!rule.empty()) md += " Unseen rule: " + rule + ".";
  }
  md += "\n\n| backbone | method | selector | n | BLEU | ROUGE-L | BERTScore | SA | SC |";
  if (any_split) md += " SA seen | SA unseen | SA delta | SC seen | SC unseen | SC delta |";
  md += "\n|---|---|---|---|---|---|---|---|---|";
  if (any_split) md += "---|---|---|---|---|---|";
  md += "\n";

  for (auto* r : sorted) {
    const auto& o = r->overall;
    const bool has_sel = r->selector.is_object();
    std::string sel = has_sel ? r->selector.value("strategy", std::string("all")) : std::string("all");
    if (has_sel && r->selector.contains("k")) sel += "@" + std::to_string(r->selector["k"].get<std::size_t>());
    std::string method = r->method;
    if (!r->aspects.empty() && r->aspects.size() < 6) {
      std::string codes;
      for (const auto& a : r->aspects) codes += (codes.empty() ? "" : "+") + a;
      method += " [" + codes + "]";
    }
    Json row{{"fingerprint", r->fingerprint},
             {"backbone", r->backbone},
             {"method", r->method},
             {"aspects", r->aspects},
             {"selector", r->selector},
             {"overall", bench::to_json(o)},
             {"generation_calls", r->generation_calls},
             {"judge_calls", r->judge_calls},
             {"wall_seconds", r->wall_seconds}};
    md += "| " + r->backbone + " | " + method + " | " + sel + " | " + std::to_string(o.n_generated) +
          " | " + num(o.bleu) + " | " + num(o.rouge_l) + " | " + num(o.bertscore) + " | " +
          num(o.sa_mean, 2) + " | " + num(o.sc_mean, 2) + " |";
    if (any_split) {
      std::optional<double> sa_s, sa_u, sc_s, sc_u;
      if (r->seen) {
        sa_s = r->seen->sa_mean;
        sc_s = r->seen->sc_mean;
        row["seen"] = bench::to_json(*r->seen);
      }
      if (r->unseen) {
        sa_u = r->unseen->sa_mean;
        sc_u = r->unseen->sc_mean;
        row["unseen"] = bench::to_json(*r->unseen);
      }
      const auto d_sa = relative_delta(sa_s, sa_u);
      const auto d_sc = relative_delta(sc_s, sc_u);
      row["delta_pct"] = {{"sa", opt(d_sa)}, {"sc", opt(d_sc)}};
      md += " " + num(sa_s, 2) + " | " + num(sa_u, 2) + " | " + pct(d_sa) + " | " + num(sc_s, 2) +
            " | " + num(sc_u, 2) + " | " + pct(d_sc) + " |";
    }
    md += "\n";
    out.json["rows"].push_back(std::move(row));
  }
  out.markdown = std::move(md);
  return out;
}

Rendered write_report(const std::vector<bench::RunRecord>& records, const fs::path& out_dir) {
  auto r = render_report(records);
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "report.json", r.json.dump(2) + "\n");
  write_file_atomic(out_dir / "report.md", r.markdown);
  return r;
}

std::vector<bench::RunRecord> load_records(const std::vector<fs::path>& dirs) {
  std::vector<bench::RunRecord> out;
  for (const auto& d : dirs) {
    if (fs::is_regular_file(d / "report.json")) {
      out.push_back(bench::load_record(d / "report.json"));
      continue;
    }
    if (!fs::is_directory(d)) throw ReportError("not a run directory: " + d.string());
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(d))
      if (e.is_directory() && fs::is_regular_file(e.path() / "report.json")) found.push_back(e.path());
    std::sort(found.begin(), found.end());
    if (found.empty()) throw ReportError("no run records under " + d.string());
    for (const auto& f : found) out.push_back(bench::load_record(f / "report.json"));
  }
  return out;
}

}  // namespace buzzdef::report
