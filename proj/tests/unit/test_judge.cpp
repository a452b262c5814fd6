// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include <gtest/gtest.h>

#include <fstream>

#include "buzzdef/judge.hpp"
#include "buzzdef/mock_provider.hpp"
#include "buzzdef/text.hpp"
#include "test_support.hpp"

using namespace buzzdef;
using namespace buzzdef::judge;
using buzzdef::testing::TempDir;

namespace {

std::string scores(Json sa, Json sc) {
  return Json{{"准确性", Json::array({sa, "理由甲"})}, {"细节完整性", Json::array({sc, "理由乙"})}}.dump();
}

struct Rig {
  Rig() : gw(config()), mock(std::make_shared<llm::MockProvider>()) {
    gw.set_provider("m", mock);
    gw.set_sleeper([](std::chrono::milliseconds) {});
  }
  static llm::GatewayConfig config() {
    llm::GatewayConfig cfg;
    llm::BackboneConfig b;
    b.id = "m";
    b.type = "mock";
    cfg.backbones["m"] = b;
    return cfg;
  }
  JudgeOptions opts() const {
    JudgeOptions o;
    o.judge_backbone = "m";
    return o;
  }
  llm::Gateway gw;
  std::shared_ptr<llm::MockProvider> mock;
};

ContaminationTag tag(std::string word, std::string bb, Status s) {
  ContaminationTag t;
  t.word = std::move(word);
  t.backbone_id = std::move(bb);
  t.status = s;
  t.probe_sa = s == Status::Seen ? 4 : 1;
  t.probe_sc = s == Status::Seen ? 4 : 1;
  return t;
}

}  // namespace

TEST(Judge, RendersBothDefinitionsIntoTemplate) {
  const auto r = render_judge_prompt("预测X", "参考Y");
  EXPECT_TRUE(text::contains(r.text, "【定义】：预测X\n【参考定义】：参考Y"));
}

TEST(Judge, ParsesScoresAndReasons) {
  Rig r;
  r.mock->set_handler([](const llm::ProviderCall&) { return scores(4, 2); });
  const auto v = judge_definition("预测", "参考", "躺平", r.gw, r.opts());
  EXPECT_EQ(v.sa, 4);
  EXPECT_EQ(v.sc, 2);
  EXPECT_EQ(v.sa_reason, "理由甲");
  EXPECT_EQ(v.judge_backbone, "m");
  EXPECT_EQ(v.calls, 1);
  const auto back = verdict_from_json(to_json(v));
  EXPECT_EQ(back.sa, 4);
  EXPECT_EQ(back.sc_reason, "理由乙");
}

TEST(Judge, OutOfRangeReQueriesOnceWithReminder) {
  Rig r;
  r.mock->set_handler([](const llm::ProviderCall& c) {
    return text::contains(c.prompt, std::string(kRangeReminder)) ? scores(5, 5) : scores(7, 3);
  });
  const auto v = judge_definition("预测", "参考", "躺平", r.gw, r.opts());
  EXPECT_EQ(v.sa, 5);
  EXPECT_EQ(v.calls, 2);
  const auto prompts = r.mock->prompts();
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[1], prompts[0] + "\n" + std::string(kRangeReminder));
}

TEST(Judge, StillOutOfRangeIsExcludedNotClamped) {
  Rig r;
  r.mock->set_handler([](const llm::ProviderCall&) { return scores(0, 6); });
  EXPECT_THROW(judge_definition("预测", "参考", "躺平", r.gw, r.opts()), OutOfRangeError);
  EXPECT_EQ(r.mock->calls(), 2u);
}

TEST(Judge, UnparseableReplyBecomesJudgeError) {
  Rig r;
  r.mock->set_handler([](const llm::ProviderCall&) { return std::string("我拒绝评分"); });
  try {
    judge_definition("预测", "参考", "躺平", r.gw, r.opts());
    FAIL() << "expected JudgeError";
  } catch (const OutOfRangeError&) {
    FAIL() << "wrong subtype";
  } catch (const JudgeError&) {
  }
  EXPECT_EQ(r.mock->calls(), 2u);  // one parse retry inside the gateway
}

TEST(Judge, RejectsEmptyInputsAndMissingBackbone) {
  Rig r;
  EXPECT_THROW(judge_definition(" ", "参考", "w", r.gw, r.opts()), JudgeError);
  EXPECT_THROW(judge_definition("预测", "", "w", r.gw, r.opts()), JudgeError);
  EXPECT_THROW(judge_definition("预测", "参考", "w", r.gw, JudgeOptions{}), JudgeError);
  EXPECT_EQ(r.mock->calls(), 0u);
  EXPECT_THROW(verdict_from_json(Json{{"word", "w"}, {"sa", 9}, {"sc", 1}}), JudgeError);
}

TEST(Judge, DefaultBackboneSelection) {
  llm::GatewayConfig cfg;
  EXPECT_THROW(default_judge_backbone(cfg), llm::ConfigError);
  const std::vector<std::pair<std::string, int>> strengths{{"b", 3}, {"a", 3}, {"c", 1}};
  for (const auto& [id, s] : strengths) {
    llm::BackboneConfig b;
    b.id = id;
    b.strength = s;
    cfg.backbones[id] = b;
  }
  EXPECT_EQ(default_judge_backbone(cfg), "a");  // tie on strength 3 goes to the smaller id
  cfg.backbones["c"].strength = 9;
  EXPECT_EQ(default_judge_backbone(cfg), "c");
  cfg.judge_backbone = "b";
  EXPECT_EQ(default_judge_backbone(cfg), "b");
}

TEST(Contamination, BoundaryScoresUnderEachRule) {
  // (sa, sc) -> unseen under min, mean and sa-only with threshold 3.
  struct Case {
    int sa, sc;
    bool min, mean, sa_only;
  };
  for (const auto& c : {Case{2, 2, true, true, true}, Case{3, 2, true, true, false},
                        Case{2, 3, true, true, true}, Case{3, 3, false, false, false},
                        Case{4, 2, true, false, false}, Case{1, 5, true, false, true}}) {
    EXPECT_EQ(is_unseen(c.sa, c.sc, ThresholdRule::Min), c.min) << c.sa << "," << c.sc;
    EXPECT_EQ(is_unseen(c.sa, c.sc, ThresholdRule::Mean), c.mean) << c.sa << "," << c.sc;
    EXPECT_EQ(is_unseen(c.sa, c.sc, ThresholdRule::SaOnly), c.sa_only) << c.sa << "," << c.sc;
  }
}

TEST(Contamination, MinRuleAgreesWithDefinitionOnFullGrid) {
  for (int t = 1; t <= 6; ++t)
    for (int sa = 1; sa <= 5; ++sa)
      for (int sc = 1; sc <= 5; ++sc) {
        EXPECT_EQ(is_unseen(sa, sc, ThresholdRule::Min, t), sa < t || sc < t);
        EXPECT_EQ(is_unseen(sa, sc, ThresholdRule::Mean, t), (sa + sc) / 2.0 < t);
      }
}

TEST(Contamination, RuleAndStatusNames) {
  for (auto r : {ThresholdRule::Min, ThresholdRule::Mean, ThresholdRule::SaOnly})
    EXPECT_EQ(rule_from_string(to_string(r)), r);
  EXPECT_EQ(rule_from_string("sa_only"), ThresholdRule::SaOnly);
  EXPECT_THROW(rule_from_string("max"), std::invalid_argument);
  EXPECT_EQ(status_from_string("unseen"), Status::Unseen);
  EXPECT_THROW(status_from_string("maybe"), std::invalid_argument);
}

TEST(Contamination, OverrideWinsOverAutomaticStatus) {
  auto t = tag("w", "m", Status::Unseen);
  EXPECT_EQ(effective_status(t), Status::Unseen);
  t.human_override = true;
  EXPECT_EQ(effective_status(t), Status::Seen);
  t.status = Status::Seen;
  t.human_override = false;
  EXPECT_EQ(effective_status(t), Status::Unseen);
}

TEST(Contamination, TagsRoundTripThroughJsonl) {
  TempDir dir;
  auto a = tag("躺平", "m", Status::Seen);
  a.human_override = false;
  a.rule = ThresholdRule::Mean;
  a.probe_definition = "释义";
  const auto b = tag("内卷", "m", Status::Unseen);
  save_tags(dir / "tags.jsonl", {a, b});
  const auto back = load_tags(dir / "tags.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].human_override, std::optional<bool>(false));
  EXPECT_EQ(back[0].rule, ThresholdRule::Mean);
  EXPECT_EQ(back[0].probe_definition, "释义");
  EXPECT_FALSE(back[1].human_override);
  EXPECT_EQ(back[1].status, Status::Unseen);
}

TEST(Contamination, OverrideVotesTakeStrictMajority) {
  TempDir dir;
  std::filesystem::create_directories(dir / "votes");
  std::ofstream(dir / "votes" / "r1.tsv") << "# reviewer one\na\t1\nb\t0\nc\t1\n";
  std::ofstream(dir / "votes" / "r2.tsv") << "a\t1\nb\t1\nc\t0\n";
  std::ofstream(dir / "votes" / "r3.tsv") << "a\t0\nb\t0\n";
  const auto votes = load_override_votes(dir / "votes");
  EXPECT_EQ(votes.at("a"), (std::vector<int>{1, 1, 0}));
  std::vector<ContaminationTag> tags{tag("a", "m", Status::Unseen), tag("b", "m", Status::Seen),
                                     tag("c", "m", Status::Unseen), tag("d", "m", Status::Seen)};
  EXPECT_EQ(apply_overrides(tags, votes), 2u);
  EXPECT_EQ(tags[0].human_override, std::optional<bool>(true));
  EXPECT_EQ(tags[1].human_override, std::optional<bool>(false));
  EXPECT_FALSE(tags[2].human_override);  // 1 vs 1 keeps the automatic status
  EXPECT_FALSE(tags[3].human_override);
  EXPECT_EQ(apply_overrides(tags, votes), 0u);
}

TEST(Contamination, OverrideFileErrors) {
  TempDir dir;
  EXPECT_THROW(load_override_votes(dir / "missing"), JudgeError);
  std::filesystem::create_directories(dir / "bad");
  std::ofstream(dir / "bad" / "r.tsv") << "a\t2\n";
  EXPECT_THROW(load_override_votes(dir / "bad"), JudgeError);
  std::filesystem::create_directories(dir / "dup");
  std::ofstream(dir / "dup" / "r.tsv") << "a\t1\na\t0\n";
  EXPECT_THROW(load_override_votes(dir / "dup"), JudgeError);
  std::filesystem::create_directories(dir / "notab");
  std::ofstream(dir / "notab" / "r.tsv") << "a 1\n";
  EXPECT_THROW(load_override_votes(dir / "notab"), JudgeError);
}

TEST(Contamination, ProbeCorpusTagsAndUndetermined) {
  Rig r;
  const auto corpus = buzzdef::testing::synthetic_corpus(6, 2);
  // Probe replies come from the echo responder; the judge score depends on the word index.
  r.mock->set_handler([](const llm::ProviderCall& c) {
    if (text::contains(c.prompt, "\"准确性\": [INT, WHY]")) {
      for (int i = 0; i < 6; ++i) {
        const std::string w = "w00" + std::to_string(i);
        if (text::contains(c.prompt, "离线生成的" + w + "释义")) return scores(1 + i % 5, 3);
      }
    }
    return llm::echo_response(c.prompt);
  });
  r.mock->fail_when([](const llm::ProviderCall& c) { return text::contains(c.prompt, "词语：w005"); }, 400);
  ProbeOptions o;
  o.backbone_id = "m";
  o.judge = r.opts();
  const auto batch = probe_corpus(corpus, r.gw, o, 3);
  ASSERT_EQ(batch.tags.size(), 5u);
  ASSERT_EQ(batch.undetermined.count("w005"), 1u);
  for (const auto& t : batch.tags) {
    const int i = t.word.back() - '0';
    EXPECT_EQ(t.probe_sa, 1 + i % 5);
    EXPECT_EQ(t.status, i < 2 ? Status::Unseen : Status::Seen) << t.word;
    EXPECT_EQ(t.probe_definition, "离线生成的" + t.word + "释义");
  }

  const auto splits = split_by_contamination(batch.tags, corpus, {{"m", {"w005"}}});
  const auto& s = splits.at("m");
  EXPECT_EQ(s.unseen, (std::set<std::string>{"w000", "w001"}));
  EXPECT_EQ(s.seen, (std::set<std::string>{"w002", "w003", "w004"}));
  EXPECT_EQ(s.undetermined, (std::set<std::string>{"w005"}));

  TempDir dir;
  write_review_worksheet(dir / "sheet.tsv", batch.tags, corpus);
  std::ifstream in(dir / "sheet.tsv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header.rfind("word\tbackbone", 0), 0u);
  EXPECT_EQ(first.rfind("w000\tm\t1\t3\tunseen\t", 0), 0u);
}

TEST(Contamination, SplitIsAPartitionForRandomTags) {
  DeterministicRng rng(99);
  const auto corpus = buzzdef::testing::synthetic_corpus(30, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ContaminationTag> tags;
    std::map<std::string, std::set<std::string>> und;
    std::set<std::string> words;
    for (const auto& bb : {"x", "y"}) {
      for (const auto& e : corpus) {
        words.insert(e.word);
        const auto u = rng.uniform01();
        if (u < 0.1) {
          und[bb].insert(e.word);
          continue;
        }
        auto t = tag(e.word, bb, u < 0.5 ? Status::Seen : Status::Unseen);
        if (rng.uniform01() < 0.2) t.human_override = rng.uniform01() < 0.5;
        tags.push_back(t);
      }
    }
    const auto splits = split_by_contamination(tags, corpus, und);
    ASSERT_EQ(splits.size(), 2u);
    for (const auto& [bb, s] : splits) {
      EXPECT_NO_THROW(assert_partition(s, words));
      std::set<std::string> all = s.seen;
      all.insert(s.unseen.begin(), s.unseen.end());
      all.insert(s.undetermined.begin(), s.undetermined.end());
      EXPECT_EQ(all, words);
      for (const auto& w : s.seen) EXPECT_FALSE(s.unseen.count(w));
    }
    for (const auto& t : tags) {
      const auto& s = splits.at(t.backbone_id);
      EXPECT_EQ(s.seen.count(t.word) == 1, effective_status(t) == Status::Seen);
    }
  }
}

TEST(Contamination, SplitRejectsBadTagSets) {
  const auto corpus = buzzdef::testing::synthetic_corpus(2, 1);
  const auto a = tag("w000", "m", Status::Seen);
  const auto b = tag("w001", "m", Status::Unseen);
  EXPECT_NO_THROW(split_by_contamination({a, b}, corpus));
  EXPECT_THROW(split_by_contamination({a}, corpus), JudgeError);
  EXPECT_THROW(split_by_contamination({a, b, a}, corpus), JudgeError);
  EXPECT_THROW(split_by_contamination({a, b, tag("zzz", "m", Status::Seen)}, corpus), JudgeError);
  EXPECT_THROW(split_by_contamination({a}, corpus, {{"m", {"nope"}}}), JudgeError);
  Split broken;
  broken.seen = {"w000"};
  broken.unseen = {"w000", "w001"};
  EXPECT_THROW(assert_partition(broken, {"w000", "w001"}), std::logic_error);
}
