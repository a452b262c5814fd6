// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/generation.hpp"

#include <algorithm>
#include <future>
#include <set>

#include <spdlog/spdlog.h>

#include "buzzdef/text.hpp"

namespace buzzdef::gen {

namespace {

using tmpl::Bindings;

std::string str(std::string_view v) { return std::string(v); }

}  // namespace

const std::vector<AspectSpec>& canonical_aspects() {
  static const std::vector<AspectSpec> table{
      {AspectId::IU, "IU", "意图理解",
       "理解说话者使用该词语的意图和目的，例如说话者是想描述一个物体，还是表达一种情感"},
      {AspectId::CA, "CA", "概念形成",
       "将词语与特定的概念联系起来，例如将“狗”这个词与具有特定特征的动物类别联系起来"},
      {AspectId::LS, "LS", "语法理解",
       "理解词语在句子中的语法角色和功能，例如词语是名词、动词还是形容词，以及它与其他词语之间的关系"},
      {AspectId::SCI, "SCI", "社会线索", "利用说话者的表情、语气、姿势等社会线索来理解词语的含义"},
      {AspectId::WC, "WC", "上下文", "词语出现的具体语境，包括前后文和对话背景等"},
      {AspectId::PS, "PS", "基本学习和记忆", "从该词语的发音和拼写发出，建立它与相关概念之间的联系"},
  };
  return table;
}

const AspectSpec& aspect(AspectId id) { return canonical_aspects().at(static_cast<std::size_t>(id)); }

AspectId aspect_from_code(const std::string& code) {
  for (const auto& a : canonical_aspects())
    if (a.code == code) return a.id;
  throw std::invalid_argument("unknown aspect: " + code);
}

std::vector<AspectId> all_aspect_ids() {
  return {AspectId::IU, AspectId::CA, AspectId::LS, AspectId::SCI, AspectId::WC, AspectId::PS};
}

std::vector<AspectId> parse_aspect_list(const std::string& csv) {
  std::set<AspectId> ids;
  for (const auto& part : text::split(csv, ',')) {
    const auto t = text::trim(part);
    if (!t.empty()) ids.insert(aspect_from_code(t));
  }
  return {ids.begin(), ids.end()};
}

Json to_json(const GeneratedDefinition& g) {
  Json j{{"word", g.word},
         {"method", g.method},
         {"backbone_id", g.backbone_id},
         {"selector_fingerprint", g.selector_fingerprint},
         {"definition", g.definition},
         {"reason", g.reason},
         {"call_count", g.call_count},
         {"examples_used", g.examples_used},
         {"examples_dropped", g.examples_dropped},
         {"seed_sent", g.seed_sent},
         {"warnings", g.warnings}};
  if (g.aspect_trace) {
    Json t = Json::object();
    for (const auto& [k, v] : *g.aspect_trace) t[k] = {{"definition", v.definition}, {"reason", v.reason}};
    j["aspect_trace"] = t;
  } else {
    j["aspect_trace"] = nullptr;
  }
  return j;
}

GeneratedDefinition generated_from_json(const Json& j) {
  GeneratedDefinition g;
  g.word = j.at("word").get<std::string>();
  g.method = j.at("method").get<std::string>();
  g.backbone_id = j.value("backbone_id", std::string());
  g.selector_fingerprint = j.value("selector_fingerprint", std::string());
  g.definition = j.at("definition").get<std::string>();
  g.reason = j.value("reason", std::string());
  g.call_count = j.value("call_count", 0);
  g.examples_used = j.value("examples_used", std::size_t{0});
  g.examples_dropped = j.value("examples_dropped", std::size_t{0});
  g.seed_sent = j.value("seed_sent", false);
  g.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("aspect_trace") && j["aspect_trace"].is_object()) {
    std::map<std::string, AspectCandidate> t;
    for (auto it = j["aspect_trace"].begin(); it != j["aspect_trace"].end(); ++it)
      t[it.key()] = {it.value().at("definition").get<std::string>(),
                     it.value().value("reason", std::string())};
    g.aspect_trace = std::move(t);
  }
  return g;
}

std::string format_ugc(const std::vector<std::string>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + examples[i];
  }
  return out;
}

std::string format_candidates(const std::vector<std::pair<AspectId, AspectCandidate>>& candidates,
                              bool with_reasons) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& [id, c] = candidates[i];
    if (i) out += '\n';
    out += aspect(id).name_zh + "：" + c.definition;
    if (with_reasons && !c.reason.empty()) out += "（原因：" + c.reason + "）";
  }
  return out;
}

TruncatedPrompt render_with_budget(const std::string& t, Bindings bindings,
                                   const std::vector<std::string>& examples, std::size_t budget) {
  if (examples.empty()) throw GenerationError("no examples to render");
  TruncatedPrompt tp;
  for (std::size_t keep = examples.size(); keep >= 1; --keep) {
    std::vector<std::string> head(examples.begin(),
                                  examples.begin() + static_cast<std::ptrdiff_t>(keep));
    bindings[str(tmpl::kUgc)] = format_ugc(head);
    tp.rendered = tmpl::render(t, bindings);
    tp.kept = keep;
    tp.dropped = examples.size() - keep;
    if (text::scalar_length(tp.rendered.text) <= budget) break;
    if (keep == 1) tp.over_budget = true;
  }
  tp.prompt = tp.rendered.text;
  return tp;
}

Generator::Generator(llm::Gateway& gateway, GenerationOptions opts)
    : gateway_(gateway), opts_(std::move(opts)) {
  if (opts_.aspects.empty() || opts_.aspects.size() > 6)
    throw std::invalid_argument("between 1 and 6 aspects required");
  oneshot_ = tmpl::load_template(opts_.template_dir, "examples_oneshot.txt");
  external_.push_back("focus");
}

llm::LlmRequest Generator::request(std::string prompt) const {
  llm::LlmRequest r;
  r.backbone_id = opts_.backbone_id;
  r.prompt = std::move(prompt);
  r.temperature = opts_.temperature;
  r.seed = opts_.seed;
  r.max_output = opts_.max_output;
  return r;
}

std::size_t Generator::budget() const {
  if (opts_.prompt_char_budget) return *opts_.prompt_char_budget;
  return gateway_.backbone(opts_.backbone_id).prompt_char_budget;
}

GeneratedDefinition Generator::base(const std::string& word, const std::string& method) const {
  GeneratedDefinition g;
  g.word = word;
  g.method = method;
  g.backbone_id = opts_.backbone_id;
  g.selector_fingerprint = opts_.selector_fingerprint;
  return g;
}

std::string Generator::dp_no_ugc_prompt(const std::string& word) const {
  const auto t = tmpl::load_template(opts_.template_dir, "dp_no_ugc.txt");
  return tmpl::render(t, Bindings{{str(tmpl::kBuzzword), word}}).text;
}

TruncatedPrompt Generator::dp_prompt(const std::string& word, const std::vector<std::string>& examples,
                                     bool cot) const {
  const auto t = tmpl::load_template(opts_.template_dir, cot ? "cot.txt" : "dp.txt");
  return render_with_budget(t, {{str(tmpl::kBuzzword), word}, {str(tmpl::kExamples), oneshot_}},
                            examples, budget());
}

TruncatedPrompt Generator::aspect_prompt(const std::string& word,
                                         const std::vector<std::string>& examples,
                                         const AspectSpec& a) const {
  const auto t = tmpl::load_template(opts_.template_dir, "aspect.txt");
  return render_with_budget(t,
                            {{str(tmpl::kBuzzword), word},
                             {str(tmpl::kAspect), a.name_zh},
                             {str(tmpl::kAspectExplanation), a.explanation_zh},
                             {str(tmpl::kExamples), oneshot_}},
                            examples, budget());
}

TruncatedPrompt Generator::ensemble_prompt(
    const std::string& word, const std::vector<std::string>& examples,
    const std::vector<std::pair<AspectId, AspectCandidate>>& candidates) const {
  const auto t = tmpl::load_template(opts_.template_dir, "ensemble.txt");
  return render_with_budget(t,
                            {{str(tmpl::kBuzzword), word},
                             {str(tmpl::kExamples), oneshot_},
                             {str(tmpl::kCandidates),
                              format_candidates(candidates, opts_.ensemble_with_reasons)}},
                            examples, budget());
}

GeneratedDefinition Generator::dp_no_ugc(const std::string& word) {
  auto g = base(word, "dp_no_ugc");
  auto res = gateway_.complete_structured(request(dp_no_ugc_prompt(word)), payload::probe_schema());
  g.call_count = res.calls;
  g.seed_sent = res.response.seed_sent;
  g.definition = text::trim(res.payload.str("definition"));
  if (g.definition.empty()) throw GenerationError("empty definition for " + word);
  return g;
}

GeneratedDefinition Generator::from_examples(const std::string& word,
                                             const std::vector<std::string>& examples, bool cot) {
  if (examples.empty()) throw std::invalid_argument("examples must be non-empty");
  auto g = base(word, cot ? "cot" : "dp");
  const auto tp = dp_prompt(word, examples, cot);
  g.examples_used = tp.kept;
  g.examples_dropped = tp.dropped;
  if (tp.dropped) g.warnings.push_back("truncated " + std::to_string(tp.dropped) + " example(s)");
  if (tp.over_budget) g.warnings.push_back("prompt exceeds budget with a single example");
  auto res = gateway_.complete_structured(request(tp.prompt), payload::generation_schema());
  g.call_count = res.calls;
  g.seed_sent = res.response.seed_sent;
  g.definition = text::trim(res.payload.str("定义"));
  g.reason = res.payload.str("原因");
  if (g.definition.empty()) throw GenerationError("empty definition for " + word);
  return g;
}

GeneratedDefinition Generator::dp(const std::string& word, const std::vector<std::string>& examples) {
  return from_examples(word, examples, false);
}

GeneratedDefinition Generator::cot(const std::string& word, const std::vector<std::string>& examples) {
  return from_examples(word, examples, true);
}

GeneratedDefinition Generator::ress(const std::string& word, const std::vector<std::string>& examples) {
  return ress(word, examples, opts_.aspects);
}

GeneratedDefinition Generator::ress(const std::string& word, const std::vector<std::string>& examples,
                                    const std::vector<AspectId>& aspects_in) {
  if (examples.empty()) throw std::invalid_argument("examples must be non-empty");
  std::set<AspectId> uniq(aspects_in.begin(), aspects_in.end());
  if (uniq.empty() || uniq.size() > 6) throw std::invalid_argument("between 1 and 6 aspects required");
  const std::vector<AspectId> aspects(uniq.begin(), uniq.end());  // canonical order

  auto g = base(word, "ress");
  struct StageOne {
    std::optional<AspectCandidate> candidate;
    int calls = 0;
    bool seed_sent = false;
    std::size_t kept = 0;
    std::string error;
  };
  auto run_aspect = [&](AspectId id) {
    StageOne s;
    const auto tp = aspect_prompt(word, examples, aspect(id));
    s.kept = tp.kept;
    s.calls = 1;
    try {
      auto res = gateway_.complete_structured(request(tp.prompt), payload::generation_schema());
      s.calls = res.calls;
      s.seed_sent = res.response.seed_sent;
      auto def = text::trim(res.payload.str("定义"));
      if (def.empty()) throw GenerationError("empty definition");
      s.candidate = AspectCandidate{std::move(def), res.payload.str("原因")};
    } catch (const payload::PayloadError& e) {
      s.calls = 2;
      s.error = e.what();
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  };

  std::vector<StageOne> stage(aspects.size());
  if (opts_.parallel_aspects && aspects.size() > 1) {
    std::vector<std::future<StageOne>> fs;
    for (auto id : aspects) fs.push_back(std::async(std::launch::async, run_aspect, id));
    for (std::size_t i = 0; i < fs.size(); ++i) stage[i] = fs[i].get();
  } else {
    for (std::size_t i = 0; i < aspects.size(); ++i) stage[i] = run_aspect(aspects[i]);
  }

  std::vector<std::pair<AspectId, AspectCandidate>> candidates;
  std::map<std::string, AspectCandidate> trace;
  std::size_t kept = examples.size();
  for (std::size_t i = 0; i < aspects.size(); ++i) {
    g.call_count += stage[i].calls;
    g.seed_sent = g.seed_sent || stage[i].seed_sent;
    kept = std::min(kept, stage[i].kept);
    const auto& code = aspect(aspects[i]).code;
    if (stage[i].candidate) {
      candidates.emplace_back(aspects[i], *stage[i].candidate);
      trace[code] = *stage[i].candidate;
    } else {
      g.warnings.push_back("aspect " + code + " failed: " + stage[i].error);
      spdlog::warn("{}: aspect {} failed: {}", word, code, stage[i].error);
    }
  }
  if (candidates.empty()) throw GenerationError("all aspect stages failed for " + word);

  const auto tp = ensemble_prompt(word, examples, candidates);
  kept = std::min(kept, tp.kept);
  g.examples_used = kept;
  g.examples_dropped = examples.size() - kept;
  if (g.examples_dropped)
    g.warnings.push_back("truncated " + std::to_string(g.examples_dropped) + " example(s)");
  auto res = gateway_.complete_structured(request(tp.prompt), payload::generation_schema());
  g.call_count += res.calls;
  g.definition = text::trim(res.payload.str("定义"));
  g.reason = res.payload.str("原因");
  if (g.definition.empty()) throw GenerationError("empty ensemble definition for " + word);
  g.aspect_trace = std::move(trace);
  return g;
}

void Generator::register_adapter(const std::string& method_id, std::shared_ptr<MethodAdapter> adapter) {
  adapters_[method_id] = std::move(adapter);
}

void Generator::declare_external(const std::string& method_id) {
  if (std::find(external_.begin(), external_.end(), method_id) == external_.end())
    external_.push_back(method_id);
}

bool Generator::is_known(const std::string& m) const {
  const auto& b = builtin_methods();
  return std::find(b.begin(), b.end(), m) != b.end() || adapters_.count(m) ||
         std::find(external_.begin(), external_.end(), m) != external_.end();
}

GeneratedDefinition Generator::run_method(const std::string& method_id,
                                          const corpus::BuzzwordEntry& entry,
                                          const std::vector<std::string>& selection) {
  if (method_id == "dp_no_ugc") return dp_no_ugc(entry.word);
  if (method_id == "dp") return dp(entry.word, selection);
  if (method_id == "cot") return cot(entry.word, selection);
  if (method_id == "ress") return ress(entry.word, selection);
  auto it = adapters_.find(method_id);
  if (it == adapters_.end()) {
    if (std::find(external_.begin(), external_.end(), method_id) != external_.end())
      throw GenerationError("method '" + method_id + "': adapter not configured");
    throw GenerationError("unknown method: " + method_id);
  }
  auto out = it->second->run(entry.word, selection);
  if (text::trim(out.definition).empty())
    throw AdapterError("adapter for '" + method_id + "' returned an empty definition");
  auto g = base(entry.word, method_id);
  g.definition = text::trim(out.definition);
  g.reason = out.reason;
  g.examples_used = selection.size();
  return g;
}

}  // namespace buzzdef::gen
