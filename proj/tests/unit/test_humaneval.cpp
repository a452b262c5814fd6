// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include <gtest/gtest.h>

#include <set>

#include "buzzdef/agreement.hpp"
#include "buzzdef/humaneval.hpp"
#include "buzzdef/random.hpp"
#include "test_support.hpp"

using namespace buzzdef;
using namespace buzzdef::human;
using buzzdef::testing::TempDir;

namespace {

SessionSpec make_spec(std::size_t words, std::size_t sample, std::vector<std::string> annotators = {"ann1", "ann2"}) {
  SessionSpec s;
  s.session_id = "s1";
  s.method_a = "ress";
  s.method_b = "dp";
  for (std::size_t i = 0; i < words; ++i) {
    const auto w = "词" + std::to_string(i);
    s.definitions_a[w] = "甲" + w;
    s.definitions_b[w] = "乙" + w;
    s.gold[w] = "金" + w;
  }
  s.sample = sample;
  s.seed = 42;
  s.annotators = std::move(annotators);
  return s;
}

Verdict vote(const std::string& item, const std::string& who, Choice c, int round = 1) {
  Verdict v;
  v.item_id = item;
  v.annotator_id = who;
  v.choice = c;
  v.round = round;
  return v;
}

RejectReason rejection(Session& s, const Verdict& v) {
  try {
    s.record_verdict(v);
  } catch (const VerdictRejected& e) {
    return e.reason();
  }
  ADD_FAILURE() << "verdict accepted";
  return RejectReason::Final;
}

agree::Ratings random_ratings(DeterministicRng& rng, std::size_t annotators, std::size_t items, int values,
                              double missing) {
  agree::Ratings r(annotators, std::vector<std::optional<int>>(items));
  for (auto& row : r)
    for (auto& cell : row)
      if (rng.uniform01() >= missing) cell = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(values)));
  return r;
}

}  // namespace

TEST(CreateItems, BalancedSeededAndLabelFree) {
  const auto s = make_spec(30, 10);
  const auto items = create_items(s);
  ASSERT_EQ(items.size(), 20u);
  EXPECT_EQ(items[0].item_id, "0001-SA");
  EXPECT_EQ(items[1].item_id, "0001-SC");
  std::size_t a_first = 0;
  std::set<std::string> words;
  for (const auto& it : items) {
    words.insert(it.word);
    if (it.side_a.source == "ress") ++a_first;
    EXPECT_EQ(it.gold, "金" + it.word);
    EXPECT_EQ((it.side_a.source == "ress" ? it.side_a : it.side_b).definition, "甲" + it.word);
    const auto client = to_client_json(it).dump();
    EXPECT_EQ(client.find("ress"), std::string::npos);
    EXPECT_EQ(client.find("\"dp\""), std::string::npos);
    EXPECT_EQ(item_from_json(to_json(it)).side_b.source, it.side_b.source);
  }
  EXPECT_EQ(a_first, 10u);
  EXPECT_EQ(words.size(), 10u);
  const auto again = create_items(s);
  for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(to_json(again[i]), to_json(items[i]));
  auto other = s;
  other.seed = 43;
  const auto shuffled = create_items(other);
  bool differs = false;
  for (std::size_t i = 0; i < items.size(); ++i) differs |= to_json(shuffled[i]) != to_json(items[i]);
  EXPECT_TRUE(differs);
}

TEST(CreateItems, BalanceHoldsForOddCounts) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = make_spec(9, 7);
    s.seed = seed;
    s.dimensions = {Dimension::SA};
    std::size_t a_first = 0;
    for (const auto& it : create_items(s)) a_first += it.side_a.source == "ress";
    EXPECT_EQ(a_first, 4u);
  }
}

TEST(CreateItems, RejectsBadSpecs) {
  auto s = make_spec(5, 3);
  s.method_b = "ress";
  EXPECT_THROW(create_items(s), SessionError);
  s = make_spec(5, 6);
  EXPECT_THROW(create_items(s), SessionError);
  s = make_spec(5, 0);
  EXPECT_THROW(create_items(s), SessionError);
  s = make_spec(5, 3);
  s.dimensions.clear();
  EXPECT_THROW(create_items(s), SessionError);
  s = make_spec(5, 5);
  s.gold.erase(s.gold.begin());  // only words with gold count as shared
  EXPECT_THROW(create_items(s), SessionError);
}

TEST(Consensus, UnanimityRule) {
  EXPECT_EQ(resolve_consensus({Choice::A, Choice::A}), Outcome::WinA);
  EXPECT_EQ(resolve_consensus({Choice::B}), Outcome::WinB);
  EXPECT_EQ(resolve_consensus({Choice::A, Choice::B}), Outcome::Tie);
  EXPECT_EQ(resolve_consensus({Choice::Tie, Choice::Tie}), Outcome::Tie);
  EXPECT_THROW(resolve_consensus({}), SessionError);
}

TEST(Consensus, WinRateFollowsTheMethodAcrossSides) {
  const std::vector<ResolvedItem> r{{Outcome::WinA, "x", "y"},
                                    {Outcome::WinA, "y", "x"},
                                    {Outcome::WinB, "y", "x"},
                                    {Outcome::Tie, "x", "y"}};
  const auto x = win_rate(r, "x");
  EXPECT_DOUBLE_EQ(x.win, 0.5);
  EXPECT_DOUBLE_EQ(x.lose, 0.25);
  EXPECT_DOUBLE_EQ(x.tie, 0.25);
  const auto y = win_rate(r, "y");
  EXPECT_DOUBLE_EQ(y.win, x.lose);
  EXPECT_THROW(win_rate(r, "z"), SessionError);
  EXPECT_THROW(win_rate({}, "x"), SessionError);
}

TEST(Session, RoundsConsensusAndRejections) {
  TempDir dir;
  auto sp = make_spec(4, 2);
  sp.dimensions = {Dimension::SA};
  auto s = Session::create(sp, dir / "s.jsonl");
  ASSERT_EQ(s->items().size(), 2u);
  const auto i1 = s->items()[0].item_id;
  const auto i2 = s->items()[1].item_id;

  auto n = s->next_item("ann1");
  ASSERT_TRUE(n.item);
  EXPECT_EQ(n.item->item_id, i1);
  EXPECT_EQ(n.total, 2u);
  EXPECT_THROW(s->next_item("nobody"), VerdictRejected);

  s->record_verdict(vote(i1, "ann1", Choice::A));
  EXPECT_FALSE(s->consensus(i1));
  EXPECT_EQ(rejection(*s, vote(i1, "ann1", Choice::B)), RejectReason::Duplicate);
  EXPECT_EQ(rejection(*s, vote("9999-SA", "ann1", Choice::B)), RejectReason::UnknownItem);
  EXPECT_EQ(rejection(*s, vote(i1, "mallory", Choice::B)), RejectReason::UnknownAnnotator);
  EXPECT_EQ(rejection(*s, vote(i1, "ann1", Choice::B, 3)), RejectReason::RoundNotOpen);
  EXPECT_EQ(rejection(*s, vote(i1, "ann2", Choice::B, 2)), RejectReason::RoundNotOpen);
  s->record_verdict(vote(i1, "ann2", Choice::A));
  EXPECT_EQ(s->consensus(i1), Outcome::WinA);
  EXPECT_EQ(rejection(*s, vote(i1, "ann2", Choice::B, 2)), RejectReason::Final);

  s->record_verdict(vote(i2, "ann1", Choice::A));
  s->record_verdict(vote(i2, "ann2", Choice::B));
  EXPECT_EQ(s->consensus(i2), Outcome::Tie);  // split, no discussion yet
  n = s->next_item("ann1");
  ASSERT_TRUE(n.item);
  EXPECT_EQ(n.item->item_id, i2);
  EXPECT_EQ(n.round, 2);
  EXPECT_EQ(n.done, 2u);
  s->record_verdict(vote(i2, "ann1", Choice::B, 2));
  EXPECT_EQ(s->consensus(i2), Outcome::Tie);  // round 2 incomplete
  s->record_verdict(vote(i2, "ann2", Choice::B, 2));
  EXPECT_EQ(s->consensus(i2), Outcome::WinB);
  EXPECT_FALSE(s->next_item("ann1").item);
  EXPECT_THROW(s->consensus("nope"), SessionError);

  const auto rep = s->report();
  const auto& sa = rep["dimensions"]["SA"];
  EXPECT_EQ(sa["n_resolved"], 2);
  const bool i2_ress_on_b = s->items()[1].side_b.source == "ress";
  const bool i1_ress_on_a = s->items()[0].side_a.source == "ress";
  const double ress_wins = (i1_ress_on_a ? 1.0 : 0.0) + (i2_ress_on_b ? 1.0 : 0.0);
  EXPECT_DOUBLE_EQ(sa["win_rate"]["ress"]["win"].get<double>(), ress_wins / 2);
  EXPECT_FALSE(rep["dimensions"].contains("SC"));
  EXPECT_TRUE(sa.contains("agreement"));

  s->close();
  EXPECT_TRUE(s->closed());
  EXPECT_EQ(rejection(*s, vote("9999-SA", "mallory", Choice::A)), RejectReason::Closed);
  EXPECT_FALSE(s->next_item("ann1").item);
}

TEST(Session, ReplayRestoresStateAndRefusesOverwrite) {
  TempDir dir;
  const auto log = dir / "s.jsonl";
  auto s = Session::create(make_spec(3, 3), log);
  const auto id = s->items()[0].item_id;
  s->record_verdict(vote(id, "ann1", Choice::B));
  s->record_verdict(vote(id, "ann2", Choice::B));
  s->record_verdict(vote(s->items()[1].item_id, "ann1", Choice::Tie));
  const auto before = s->report();
  EXPECT_THROW(Session::create(make_spec(3, 3), log), SessionError);

  auto r = Session::open(log);
  EXPECT_EQ(r->consensus(id), Outcome::WinB);
  EXPECT_EQ(rejection(*r, vote(id, "ann1", Choice::A)), RejectReason::Duplicate);
  EXPECT_EQ(r->next_item("ann1").done, 2u);
  EXPECT_EQ(r->report(), before);
  s->close();
  EXPECT_TRUE(Session::open(log)->closed());

  std::vector<Json> rows = read_jsonl(log);
  rows.insert(rows.begin(), Json{{"type", "verdict"}});
  write_jsonl(dir / "bad.jsonl", rows);
  EXPECT_THROW(Session::open(dir / "bad.jsonl"), SessionError);
}

TEST(Session, CreateValidatesAnnotators) {
  TempDir dir;
  EXPECT_THROW(Session::create(make_spec(3, 2, {}), dir / "a.jsonl"), SessionError);
  EXPECT_THROW(Session::create(make_spec(3, 2, {"x", "x"}), dir / "b.jsonl"), SessionError);
  auto sp = make_spec(3, 2);
  sp.session_id.clear();
  EXPECT_THROW(Session::create(sp, dir / "c.jsonl"), SessionError);
}

TEST(Alpha, HandComputedNominalCase) {
  // Annotator rows over four items; only item 2 disagrees. n = 8 values,
  // D_o = 2/8, D_e = 2*3*5/(8*7).
  const agree::Ratings r{{1, 1, 2, 2}, {1, 2, 2, 2}};
  const auto a = agree::krippendorff_alpha(r, agree::Level::Nominal);
  ASSERT_TRUE(a.alpha);
  EXPECT_NEAR(*a.alpha, 16.0 / 30.0, 1e-12);
  EXPECT_NEAR(a.observed, 0.25, 1e-12);
  EXPECT_EQ(a.pairable_values, 8u);
}

TEST(Alpha, MatchesPairEnumerationOracle) {
  DeterministicRng rng(12345);
  for (int t = 0; t < 500; ++t) {
    const auto items = 1 + rng.uniform_index(10);
    const auto r = random_ratings(rng, 2, items, 3, 0.15);
    const auto got = agree::krippendorff_alpha(r, agree::Level::Nominal).alpha;
    const auto want = buzzdef::testing::oracle_alpha(r);
    ASSERT_EQ(got.has_value(), want.has_value()) << "fixture " << t;
    if (got) EXPECT_NEAR(*got, *want, 1e-9) << "fixture " << t;
  }
}

TEST(Alpha, OrdinalMatchesOracleWithMoreAnnotators) {
  DeterministicRng rng(777);
  for (int t = 0; t < 200; ++t) {
    const auto r = random_ratings(rng, 2 + rng.uniform_index(3), 1 + rng.uniform_index(12), 5, 0.2);
    const auto got = agree::krippendorff_alpha(r, agree::Level::Ordinal).alpha;
    const auto want = buzzdef::testing::oracle_alpha(r, true);
    ASSERT_EQ(got.has_value(), want.has_value()) << "fixture " << t;
    if (got) EXPECT_NEAR(*got, *want, 1e-9) << "fixture " << t;
  }
}

TEST(Alpha, PerfectAgreementAndChanceLevel) {
  DeterministicRng rng(5);
  agree::Ratings same(3, std::vector<std::optional<int>>(50));
  for (std::size_t i = 0; i < 50; ++i) {
    const int v = 1 + static_cast<int>(rng.uniform_index(3));
    for (auto& row : same) row[i] = v;
  }
  EXPECT_DOUBLE_EQ(*agree::krippendorff_alpha(same, agree::Level::Nominal).alpha, 1.0);
  EXPECT_DOUBLE_EQ(*agree::krippendorff_alpha(same, agree::Level::Ordinal).alpha, 1.0);
  const auto noise = random_ratings(rng, 2, 10000, 3, 0.0);
  EXPECT_LT(std::abs(*agree::krippendorff_alpha(noise, agree::Level::Nominal).alpha), 0.05);
}

TEST(Alpha, InvariantUnderItemAndAnnotatorPermutation) {
  DeterministicRng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto r = random_ratings(rng, 3, 8, 4, 0.1);
    const auto base = agree::krippendorff_alpha(r, agree::Level::Ordinal).alpha;
    auto annot = r;
    std::reverse(annot.begin(), annot.end());
    auto items = r;
    const auto perm = rng.permutation(8);
    for (std::size_t a = 0; a < r.size(); ++a)
      for (std::size_t i = 0; i < 8; ++i) items[a][i] = r[a][perm[i]];
    for (const auto& other : {annot, items}) {
      const auto x = agree::krippendorff_alpha(other, agree::Level::Ordinal).alpha;
      ASSERT_EQ(x.has_value(), base.has_value());
      if (x) EXPECT_NEAR(*x, *base, 1e-9);
    }
  }
}

TEST(Alpha, UndefinedCasesAndShapeErrors) {
  const auto homog = agree::krippendorff_alpha({{2, 2}, {2, 2}}, agree::Level::Nominal);
  EXPECT_FALSE(homog.alpha);
  EXPECT_FALSE(homog.note.empty());
  const agree::Ratings sparse{{1, std::nullopt}, {std::nullopt, 2}};
  const auto few = agree::krippendorff_alpha(sparse, agree::Level::Nominal);
  EXPECT_FALSE(few.alpha);
  EXPECT_EQ(few.pairable_values, 0u);
  EXPECT_THROW(agree::krippendorff_alpha({{1, 2}}, agree::Level::Nominal), std::invalid_argument);
  EXPECT_THROW(agree::krippendorff_alpha({{1, 2}, {1}}, agree::Level::Nominal), std::invalid_argument);
  EXPECT_EQ(agree::level_from_string("ordinal"), agree::Level::Ordinal);
  EXPECT_THROW(agree::level_from_string("ratio"), std::invalid_argument);
}

TEST(RawAgreement, ItemAndDecisionVariants) {
  const agree::Ratings r{{1, 1, 3}, {1, 1, std::nullopt}, {2, 1, std::nullopt}};
  const auto raw = agree::raw_agreement(r);
  EXPECT_EQ(raw.items, 2u);  // the third item has one rating
  EXPECT_EQ(raw.pairs, 6u);
  EXPECT_DOUBLE_EQ(raw.by_items, 0.5);
  EXPECT_DOUBLE_EQ(raw.by_decisions, 4.0 / 6.0);
  const auto rep = agree::agreement_report("SA", r, agree::Level::Nominal);
  const auto j = agree::to_json(rep);
  EXPECT_EQ(j["n_items"], 2);
  EXPECT_EQ(j["n_annotators"], 3);
  EXPECT_DOUBLE_EQ(j["raw_agreement_decisions"].get<double>(), 4.0 / 6.0);
}
