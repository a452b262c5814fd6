// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include <gtest/gtest.h>

#include <fstream>

#include "buzzdef/digest.hpp"
#include "buzzdef/external_adapter.hpp"
#include "buzzdef/generation.hpp"
#include "buzzdef/mock_provider.hpp"
#include "buzzdef/text.hpp"
#include "test_support.hpp"

using namespace buzzdef;
using namespace buzzdef::gen;
using buzzdef::testing::TempDir;

namespace {

// Replies with a definition derived from the prompt so every call is
// distinguishable and replays identically.
std::string generation_reply(const llm::ProviderCall& c) {
  const auto tag = sha256_hex(c.prompt).substr(0, 8);
  return "结果：{\"词语\": \"x\", \"定义\": \"释义" + tag + "\", \"原因\": \"原因" + tag + "\"}";
}

struct Rig {
  explicit Rig(std::optional<std::filesystem::path> cache = std::nullopt) : gw(config(cache)) {
    mock = std::make_shared<llm::MockProvider>(generation_reply);
    gw.set_provider("m", mock);
  }
  static llm::GatewayConfig config(const std::optional<std::filesystem::path>& cache) {
    llm::GatewayConfig cfg;
    llm::BackboneConfig b;
    b.id = "m";
    b.type = "mock";
    cfg.backbones["m"] = b;
    cfg.cache_dir = cache;
    return cfg;
  }
  GenerationOptions opts(std::vector<AspectId> aspects = all_aspect_ids()) const {
    GenerationOptions o;
    o.backbone_id = "m";
    o.aspects = std::move(aspects);
    return o;
  }
  llm::Gateway gw;
  std::shared_ptr<llm::MockProvider> mock;
};

std::size_t count_prompts_containing(const std::vector<std::string>& ps, const std::string& needle) {
  return static_cast<std::size_t>(
      std::count_if(ps.begin(), ps.end(), [&](const std::string& p) { return text::contains(p, needle); }));
}

}  // namespace

// Digests of the loaded text, i.e. the file minus its final newline.
TEST(Templates, BuiltinTextsArePinned) {
  const std::map<std::string, std::string> pinned{
      {"aspect.txt", "dcb98a1e6f9c2ba364e684c79a1c6b777a0c4afcaca6c2ab83d12fb127f53173"},
      {"cot.txt", "095d4b0247c5263d5455595e7ae58db65a8be9c225db1c6e111053b09f233548"},
      {"dp.txt", "02253a60a7e5e10821737cc26b56ccac6dcf45e24d61c00a8ff7986cf88d23d9"},
      {"dp_no_ugc.txt", "36cca29b8f886f83f42d2ce3b2a32e1875a13ad8935c82b3ca7c13cf28ed088a"},
      {"ensemble.txt", "b472eed4b47845379846f944875870ccdeed700b91fe08846a2c1c89d79d490e"},
      {"examples_oneshot.txt", "e81c1cc473eababfa3c94b4619f8b7db3e81f2727e344f75cf61ccb1405ccb3c"},
      {"judge.txt", "caec1b8f56ff389925e771d33fda1067aa13a7a37f28b195e33be7e33d5a459a"},
      {"waus_negative.txt", "cfa2a19dfa0757f1cf89e2873fc8fe46042ccaa5fdc286ac008f779737877404"},
  };
  for (const auto& [name, digest] : pinned) EXPECT_EQ(sha256_hex(tmpl::load_template(std::nullopt, name)), digest) << name;
}

TEST(Aspects, CanonicalTableAndParsing) {
  ASSERT_EQ(canonical_aspects().size(), 6u);
  EXPECT_EQ(aspect(AspectId::SCI).code, "SCI");
  EXPECT_EQ(aspect(AspectId::IU).name_zh, "意图理解");
  EXPECT_EQ(parse_aspect_list("WC, IU,IU"), (std::vector<AspectId>{AspectId::IU, AspectId::WC}));
  EXPECT_THROW(parse_aspect_list("IU,XX"), std::invalid_argument);
}

TEST(Prompts, DpPromptIsTheTemplateWithSlotsFilled) {
  Rig r;
  Generator g(r.gw, r.opts());
  const auto tp = g.dp_prompt("躺平", {"我躺平了", "躺平吧"}, false);
  const auto expected = tmpl::render(tmpl::load_template(std::nullopt, "dp.txt"),
                                     {{"[BUZZWORD]", "躺平"},
                                      {"[EXAMPLES]", tmpl::load_template(std::nullopt, "examples_oneshot.txt")},
                                      {"[UGC_SENTENCES]", "1. 我躺平了\n2. 躺平吧"}});
  EXPECT_EQ(tp.prompt, expected.text);
  EXPECT_EQ(tmpl::unrender(tp.rendered), tmpl::load_template(std::nullopt, "dp.txt"));
  EXPECT_NE(g.dp_prompt("躺平", {"a躺平"}, true).prompt, g.dp_prompt("躺平", {"a躺平"}, false).prompt);
  const auto ap = g.aspect_prompt("躺平", {"a躺平"}, aspect(AspectId::LS));
  EXPECT_TRUE(text::contains(ap.prompt, "从语法理解角度"));
  EXPECT_TRUE(text::contains(ap.prompt, aspect(AspectId::LS).explanation_zh));
}

TEST(Prompts, EnsembleSeesDefinitionsOnlyByDefault) {
  Rig r;
  Generator g(r.gw, r.opts());
  const std::vector<std::pair<AspectId, AspectCandidate>> cands{{AspectId::IU, {"定义一", "理由一"}},
                                                                {AspectId::WC, {"定义二", "理由二"}}};
  const auto p = g.ensemble_prompt("躺平", {"a躺平"}, cands).prompt;
  EXPECT_TRUE(text::contains(p, "意图理解：定义一\n上下文：定义二"));
  EXPECT_FALSE(text::contains(p, "理由一"));
  auto o = r.opts();
  o.ensemble_with_reasons = true;
  Generator with(r.gw, o);
  EXPECT_TRUE(text::contains(with.ensemble_prompt("躺平", {"a躺平"}, cands).prompt, "理由一"));
}

TEST(Prompts, TruncationDropsFromTheEndAndKeepsOne) {
  const std::vector<std::string> ex{std::string(50, 'a'), std::string(50, 'b'), std::string(50, 'c')};
  const auto full = render_with_budget("[UGC_SENTENCES]", {}, ex, 1000);
  EXPECT_EQ(full.kept, 3u);
  const auto cut = render_with_budget("[UGC_SENTENCES]", {}, ex, 120);
  EXPECT_EQ(cut.kept, 2u);
  EXPECT_EQ(cut.dropped, 1u);
  EXPECT_FALSE(cut.over_budget);
  const auto tiny = render_with_budget("[UGC_SENTENCES]", {}, ex, 10);
  EXPECT_EQ(tiny.kept, 1u);
  EXPECT_TRUE(tiny.over_budget);
  EXPECT_THROW(render_with_budget("[UGC_SENTENCES]", {}, {}, 10), GenerationError);
}

TEST(Generator, DpAndCotMakeOneCallEach) {
  Rig r;
  Generator g(r.gw, r.opts());
  const auto d = g.dp("躺平", {"我躺平了"});
  EXPECT_EQ(d.method, "dp");
  EXPECT_EQ(d.call_count, 1);
  EXPECT_TRUE(d.definition.rfind("释义", 0) == 0);
  EXPECT_FALSE(d.reason.empty());
  EXPECT_EQ(g.cot("躺平", {"我躺平了"}).call_count, 1);
  EXPECT_EQ(r.mock->calls(), 2u);
  EXPECT_THROW(g.dp("躺平", {}), std::invalid_argument);
}

TEST(Generator, DpNoUgcUsesProbeSchema) {
  Rig r;
  r.mock->set_handler([](const llm::ProviderCall&) { return std::string("{\"word\": \"躺平\", \"definition\": \" 放弃 \"}"); });
  Generator g(r.gw, r.opts());
  const auto d = g.dp_no_ugc("躺平");
  EXPECT_EQ(d.definition, "放弃");
  EXPECT_TRUE(text::contains(r.mock->prompts().at(0), "躺平"));
}

TEST(Ress, SixAspectsMakeSevenCallsWithCompleteTrace) {
  Rig r;
  Generator g(r.gw, r.opts());
  const auto d = g.ress("躺平", {"我躺平了", "躺平吧"});
  EXPECT_EQ(d.call_count, 7);
  EXPECT_EQ(r.mock->calls(), 7u);
  ASSERT_TRUE(d.aspect_trace);
  ASSERT_EQ(d.aspect_trace->size(), 6u);
  for (const auto& a : canonical_aspects()) EXPECT_FALSE(d.aspect_trace->at(a.code).definition.empty());
  const auto prompts = r.mock->prompts();
  EXPECT_EQ(count_prompts_containing(prompts, "[参考定义]: "), 1u);
  // The ensemble prompt carries every stage-one definition.
  const auto& ens = *std::find_if(prompts.begin(), prompts.end(),
                                  [](const std::string& p) { return text::contains(p, "[参考定义]: "); });
  for (const auto& [code, c] : *d.aspect_trace) EXPECT_TRUE(text::contains(ens, c.definition)) << code;
}

TEST(Ress, AspectSubsetsAndSequentialMode) {
  Rig r;
  auto o = r.opts({AspectId::WC});
  o.parallel_aspects = false;
  Generator g(r.gw, o);
  const auto d = g.ress("躺平", {"我躺平了"});
  EXPECT_EQ(d.call_count, 2);
  ASSERT_EQ(d.aspect_trace->size(), 1u);
  EXPECT_TRUE(d.aspect_trace->count("WC"));
  const auto three = g.ress("躺平", {"我躺平了"}, {AspectId::PS, AspectId::IU, AspectId::IU, AspectId::CA});
  EXPECT_EQ(three.call_count, 4);
  EXPECT_THROW(g.ress("躺平", {"x"}, {}), std::invalid_argument);
}

TEST(Ress, FailedAspectIsWarnedAndSkipped) {
  Rig r;
  r.mock->fail_when([](const llm::ProviderCall& c) { return text::contains(c.prompt, "从社会线索角度"); }, 400);
  Generator g(r.gw, r.opts());
  const auto d = g.ress("躺平", {"我躺平了"});
  EXPECT_EQ(d.aspect_trace->size(), 5u);
  EXPECT_FALSE(d.aspect_trace->count("SCI"));
  ASSERT_FALSE(d.warnings.empty());
  EXPECT_TRUE(text::contains(d.warnings[0], "SCI"));
}

TEST(Ress, AllAspectsFailingIsAnError) {
  Rig r;
  r.mock->fail_when([](const llm::ProviderCall&) { return true; }, 400);
  Generator g(r.gw, r.opts());
  EXPECT_THROW(g.ress("躺平", {"我躺平了"}), GenerationError);
}

TEST(Ress, TwentyWordsThenWarmCache) {
  TempDir dir;
  const auto corpus = buzzdef::testing::synthetic_corpus(20, 3);
  {
    Rig r(dir.path());
    Generator g(r.gw, r.opts());
    for (const auto& e : corpus) g.ress(e.word, e.examples);
    EXPECT_EQ(r.mock->calls(), 140u);
  }
  Rig warm(dir.path());
  Generator g(warm.gw, warm.opts());
  for (const auto& e : corpus) EXPECT_EQ(g.ress(e.word, e.examples).aspect_trace->size(), 6u);
  EXPECT_EQ(warm.mock->calls(), 0u);
}

TEST(Generated, JsonRoundTrip) {
  GeneratedDefinition g;
  g.word = "躺平";
  g.method = "ress";
  g.backbone_id = "m";
  g.definition = "d";
  g.reason = "r";
  g.aspect_trace = std::map<std::string, AspectCandidate>{{"IU", {"a", "b"}}};
  g.call_count = 7;
  g.warnings = {"w"};
  const auto back = generated_from_json(to_json(g));
  EXPECT_EQ(back.call_count, 7);
  EXPECT_EQ(back.aspect_trace, g.aspect_trace);
  EXPECT_EQ(back.warnings, g.warnings);
}

// External method adapters ---------------------------------------------------

namespace {

class StaticAdapter : public MethodAdapter {
 public:
  AspectCandidate run(const std::string& word, const std::vector<std::string>& ex) override {
    ++calls;
    return {"  外部" + word + std::to_string(ex.size()) + " ", "r"};
  }
  int calls = 0;
};

}  // namespace

TEST(Adapters, RegisteredAdapterServesRunMethod) {
  Rig r;
  Generator g(r.gw, r.opts());
  auto a = std::make_shared<StaticAdapter>();
  EXPECT_TRUE(g.is_known("focus"));
  EXPECT_FALSE(g.is_known("other"));
  corpus::BuzzwordEntry e{"躺平", "", "d", {"躺平1", "躺平2"}};
  EXPECT_THROW(g.run_method("focus", e, e.examples), GenerationError);
  EXPECT_THROW(g.run_method("other", e, e.examples), GenerationError);
  g.register_adapter("focus", a);
  const auto d = g.run_method("focus", e, e.examples);
  EXPECT_EQ(d.definition, "外部躺平2");
  EXPECT_EQ(d.method, "focus");
  EXPECT_EQ(a->calls, 1);
  EXPECT_EQ(r.mock->calls(), 0u);
}

TEST(Adapters, ReplyParsing) {
  EXPECT_EQ(parse_adapter_reply(R"({"definition":"d","reason":"r"})").reason, "r");
  EXPECT_THROW(parse_adapter_reply("[]"), AdapterError);
  EXPECT_THROW(parse_adapter_reply(R"({"definition":""})"), AdapterError);
  EXPECT_THROW(parse_adapter_reply(R"({"definition":"d","reason":3})"), AdapterError);
  EXPECT_EQ(adapter_request("w", {"a"}).dump(), R"({"examples":["a"],"word":"w"})");
}

TEST(Adapters, SubprocessSpeaksOneJsonLine) {
  TempDir dir;
  const auto script = dir / "adapter.sh";
  std::ofstream(script) << "#!/bin/sh\nread line\nprintf '{\"definition\": \"子进程\", \"reason\": \"%s\"}\\n' \"$(printf %s \"$line\" | wc -c | tr -d ' ')\"\n";
  SubprocessAdapter a({"/bin/sh", script.string()}, std::chrono::seconds(10));
  const auto c = a.run("躺平", {"躺平了"});
  EXPECT_EQ(c.definition, "子进程");
  EXPECT_EQ(std::stoul(c.reason), adapter_request("躺平", {"躺平了"}).dump().size());
}

TEST(Adapters, SubprocessFailuresAreAdapterErrors) {
  SubprocessAdapter fails({"/bin/sh", "-c", "exit 3"}, std::chrono::seconds(10));
  EXPECT_THROW(fails.run("w", {"w"}), AdapterError);
  SubprocessAdapter garbage({"/bin/sh", "-c", "echo nope"}, std::chrono::seconds(10));
  EXPECT_THROW(garbage.run("w", {"w"}), AdapterError);
  SubprocessAdapter missing({"/nonexistent/binary"}, std::chrono::seconds(10));
  EXPECT_THROW(missing.run("w", {"w"}), AdapterError);
  SubprocessAdapter slow({"/bin/sh", "-c", "sleep 5"}, std::chrono::seconds(1));
  EXPECT_THROW(slow.run("w", {"w"}), AdapterError);
}

TEST(Adapters, FromJson) {
  const auto m = adapters_from_json(Json::parse(R"({"focus": {"argv": ["/bin/true"]}, "h": {"type": "http", "url": "http://x/y"}})"));
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(adapters_from_json(Json::parse(R"({"z": {"type": "grpc"}})")), std::invalid_argument);
}
