// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/humaneval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>

#include "buzzdef/random.hpp"

namespace buzzdef::human {

std::string to_string(Dimension d) { return d == Dimension::SA ? "SA" : "SC"; }

std::string to_string(Choice c) {
  switch (c) {
    case Choice::A: return "A";
    case Choice::B: return "B";
    case Choice::Tie: return "Tie";
  }
  return "Tie";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::WinA: return "WinA";
    case Outcome::WinB: return "WinB";
    case Outcome::Tie: return "Tie";
  }
  return "Tie";
}

Dimension dimension_from_string(const std::string& s) {
  if (s == "SA") return Dimension::SA;
  if (s == "SC") return Dimension::SC;
  throw std::invalid_argument("unknown dimension: " + s);
}

Choice choice_from_string(const std::string& s) {
  if (s == "A") return Choice::A;
  if (s == "B") return Choice::B;
  if (s == "Tie") return Choice::Tie;
  throw std::invalid_argument("unknown choice: " + s);
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::UnknownItem: return "unknown_item";
    case RejectReason::UnknownAnnotator: return "unknown_annotator";
    case RejectReason::Duplicate: return "duplicate";
    case RejectReason::Closed: return "closed";
    case RejectReason::RoundNotOpen: return "round_not_open";
    case RejectReason::Final: return "final";
  }
  return "rejected";
}

Json to_json(const ComparisonItem& it) {
  return Json{{"item_id", it.item_id},
              {"word", it.word},
              {"gold", it.gold},
              {"dimension", to_string(it.dimension)},
              {"side_assignment_seed", it.side_assignment_seed},
              {"side_a", {{"definition", it.side_a.definition}, {"source", it.side_a.source}}},
              {"side_b", {{"definition", it.side_b.definition}, {"source", it.side_b.source}}}};
}

ComparisonItem item_from_json(const Json& j) {
  ComparisonItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.word = j.at("word").get<std::string>();
  it.gold = j.at("gold").get<std::string>();
  it.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  it.side_assignment_seed = j.at("side_assignment_seed").get<std::uint64_t>();
  it.side_a = {j.at("side_a").at("definition").get<std::string>(),
               j.at("side_a").at("source").get<std::string>()};
  it.side_b = {j.at("side_b").at("definition").get<std::string>(),
               j.at("side_b").at("source").get<std::string>()};
  return it;
}

Json to_client_json(const ComparisonItem& it) {
  return Json{{"item_id", it.item_id},
              {"word", it.word},
              {"gold", it.gold},
              {"dimension", to_string(it.dimension)},
              {"definition_a", it.side_a.definition},
              {"definition_b", it.side_b.definition}};
}

std::vector<ComparisonItem> create_items(const SessionSpec& spec) {
  if (spec.method_a.empty() || spec.method_b.empty() || spec.method_a == spec.method_b)
    throw SessionError("a session compares two distinct methods");
  if (spec.dimensions.empty()) throw SessionError("no dimensions requested");
  if (spec.sample == 0) throw SessionError("sample must be positive");
  std::vector<std::string> shared;
  for (const auto& [w, d] : spec.definitions_a)
    if (spec.definitions_b.count(w) && spec.gold.count(w)) shared.push_back(w);
  if (spec.sample > shared.size())
    throw SessionError("sample of " + std::to_string(spec.sample) + " exceeds the " +
                       std::to_string(shared.size()) + " words both runs share");

  DeterministicRng pick(derive_seed(spec.seed, "humaneval-sample"));
  const auto perm = pick.permutation(shared.size());

  const std::size_t n = spec.sample * spec.dimensions.size();
  std::vector<char> a_first(n, 0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) a_first[i] = 1;
  DeterministicRng sides(derive_seed(spec.seed, "humaneval-sides"));
  sides.shuffle(a_first);

  std::vector<ComparisonItem> items;
  items.reserve(n);
  for (std::size_t s = 0; s < spec.sample; ++s) {
    const auto& word = shared[perm[s]];
    for (const auto dim : spec.dimensions) {
      ComparisonItem it;
      char id[32];
      std::snprintf(id, sizeof id, "%04zu-%s", s + 1, to_string(dim).c_str());
      it.item_id = id;
      it.word = word;
      it.gold = spec.gold.at(word);
      it.dimension = dim;
      it.side_assignment_seed = derive_seed(spec.seed, it.item_id);
      Side a{spec.definitions_a.at(word), spec.method_a};
      Side b{spec.definitions_b.at(word), spec.method_b};
      if (!a_first[items.size()]) std::swap(a, b);
      it.side_a = std::move(a);
      it.side_b = std::move(b);
      items.push_back(std::move(it));
    }
  }
  return items;
}

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Json to_json(const Verdict& v) {
  return Json{{"item_id", v.item_id},
              {"annotator_id", v.annotator_id},
              {"choice", to_string(v.choice)},
              {"round", v.round},
              {"timestamp", v.timestamp}};
}

Verdict verdict_from_json(const Json& j) {
  Verdict v;
  v.item_id = j.at("item_id").get<std::string>();
  v.annotator_id = j.at("annotator_id").get<std::string>();
  v.choice = choice_from_string(j.at("choice").get<std::string>());
  v.round = j.value("round", 1);
  v.timestamp = j.value("timestamp", std::string());
  return v;
}

Outcome resolve_consensus(const std::vector<Choice>& votes) {
  if (votes.empty()) throw SessionError("no votes to resolve");
  const Choice first = votes.front();
  for (const auto c : votes)
    if (c != first) return Outcome::Tie;
  if (first == Choice::A) return Outcome::WinA;
  if (first == Choice::B) return Outcome::WinB;
  return Outcome::Tie;
}

WinRate win_rate(const std::vector<ResolvedItem>& outcomes, const std::string& method) {
  if (outcomes.empty()) throw SessionError("no resolved items");
  std::size_t win = 0, lose = 0, tie = 0;
  for (const auto& o : outcomes) {
    const bool on_a = o.source_a == method;
    if (!on_a && o.source_b != method) throw SessionError("method " + method + " not in item");
    if (o.outcome == Outcome::Tie) {
      ++tie;
    } else if ((o.outcome == Outcome::WinA) == on_a) {
      ++win;
    } else {
      ++lose;
    }
  }
  const auto n = static_cast<double>(outcomes.size());
  return WinRate{static_cast<double>(win) / n, static_cast<double>(lose) / n,
                 static_cast<double>(tie) / n, outcomes.size()};
}

std::unique_ptr<Session> Session::create(const SessionSpec& spec, const std::filesystem::path& log) {
  if (spec.session_id.empty()) throw SessionError("session id required");
  if (spec.annotators.size() < 1) throw SessionError("at least one annotator required");
  if (std::set<std::string>(spec.annotators.begin(), spec.annotators.end()).size() !=
      spec.annotators.size())
    throw SessionError("duplicate annotator id");
  if (std::filesystem::exists(log)) throw SessionError("session log already exists: " + log.string());
  auto items = create_items(spec);
  Json header{{"type", "session"},
              {"session_id", spec.session_id},
              {"method_a", spec.method_a},
              {"method_b", spec.method_b},
              {"seed", spec.seed},
              {"annotators", spec.annotators},
              {"items", Json::array()}};
  for (const auto& it : items) header["items"].push_back(to_json(it));
  if (log.has_parent_path()) std::filesystem::create_directories(log.parent_path());
  append_jsonl(log, header);
  return open(log);
}

std::unique_ptr<Session> Session::open(const std::filesystem::path& log) {
  std::unique_ptr<Session> s(new Session());
  s->log_ = log;
  bool have_header = false;
  for (const auto& j : read_jsonl(log)) {
    const auto type = j.value("type", std::string());
    if (type == "session") {
      if (have_header) throw SessionError("second session header in " + log.string());
      have_header = true;
      s->id_ = j.at("session_id").get<std::string>();
      s->method_a_ = j.at("method_a").get<std::string>();
      s->method_b_ = j.at("method_b").get<std::string>();
      s->annotators_ = j.at("annotators").get<std::vector<std::string>>();
      for (const auto& it : j.at("items")) {
        s->item_index_[it.at("item_id").get<std::string>()] = s->items_.size();
        s->items_.push_back(item_from_json(it));
      }
    } else if (!have_header) {
      throw SessionError("event before session header in " + log.string());
    } else if (type == "verdict") {
      const auto v = verdict_from_json(j);
      s->check(v);
      s->apply(v);
    } else if (type == "close") {
      s->closed_ = true;
    } else {
      throw SessionError("unknown event type '" + type + "' in " + log.string());
    }
  }
  if (!have_header) throw SessionError("no session header in " + log.string());
  return s;
}

bool Session::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool Session::round_complete(const std::string& item_id, int round) const {
  auto it = votes_.find({item_id, round});
  return it != votes_.end() && it->second.size() == annotators_.size();
}

std::optional<Outcome> Session::consensus_locked(const std::string& item_id) const {
  if (!round_complete(item_id, 1)) return std::nullopt;
  auto collect = [&](int round) {
    std::vector<Choice> out;
    for (const auto& [a, c] : votes_.at({item_id, round})) out.push_back(c);
    return out;
  };
  const auto first = collect(1);
  const bool split = std::any_of(first.begin(), first.end(), [&](Choice c) { return c != first[0]; });
  if (split && round_complete(item_id, 2)) return resolve_consensus(collect(2));
  return resolve_consensus(first);
}

void Session::check(const Verdict& v) const {
  if (closed_) throw VerdictRejected(RejectReason::Closed, "session " + id_ + " is closed");
  if (!item_index_.count(v.item_id))
    throw VerdictRejected(RejectReason::UnknownItem, "unknown item " + v.item_id);
  if (std::find(annotators_.begin(), annotators_.end(), v.annotator_id) == annotators_.end())
    throw VerdictRejected(RejectReason::UnknownAnnotator, "unknown annotator " + v.annotator_id);
  if (v.round != 1 && v.round != 2)
    throw VerdictRejected(RejectReason::RoundNotOpen, "round must be 1 or 2");
  auto it = votes_.find({v.item_id, v.round});
  if (it != votes_.end() && it->second.count(v.annotator_id))
    throw VerdictRejected(RejectReason::Duplicate,
                          "annotator " + v.annotator_id + " already voted on " + v.item_id);
  if (v.round == 2) {
    if (!round_complete(v.item_id, 1))
      throw VerdictRejected(RejectReason::RoundNotOpen, "round 1 of " + v.item_id + " is incomplete");
    const auto& first = votes_.at({v.item_id, 1});
    std::set<Choice> distinct;
    for (const auto& [a, c] : first) distinct.insert(c);
    if (distinct.size() == 1)
      throw VerdictRejected(RejectReason::Final, "consensus for " + v.item_id + " already recorded");
  }
}

void Session::apply(const Verdict& v) { votes_[{v.item_id, v.round}][v.annotator_id] = v.choice; }

void Session::record_verdict(Verdict v) {
  std::lock_guard lock(mu_);
  check(v);
  if (v.timestamp.empty()) v.timestamp = now_iso();
  Json row = to_json(v);
  row["type"] = "verdict";
  append_jsonl(log_, row);
  apply(v);
}

void Session::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  append_jsonl(log_, Json{{"type", "close"}, {"timestamp", now_iso()}});
  closed_ = true;
}

NextItem Session::next_item(const std::string& annotator) const {
  std::lock_guard lock(mu_);
  if (std::find(annotators_.begin(), annotators_.end(), annotator) == annotators_.end())
    throw VerdictRejected(RejectReason::UnknownAnnotator, "unknown annotator " + annotator);
  NextItem n;
  n.total = items_.size();
  auto voted = [&](const std::string& id, int round) {
    auto it = votes_.find({id, round});
    return it != votes_.end() && it->second.count(annotator);
  };
  for (const auto& it : items_)
    if (voted(it.item_id, 1)) ++n.done;
  if (closed_) return n;
  for (const auto& it : items_) {
    if (!voted(it.item_id, 1)) {
      n.item = it;
      return n;
    }
  }
  for (const auto& it : items_) {
    if (voted(it.item_id, 2) || !round_complete(it.item_id, 1)) continue;
    std::set<Choice> distinct;
    for (const auto& [a, c] : votes_.at({it.item_id, 1})) distinct.insert(c);
    if (distinct.size() > 1) {
      n.item = it;
      n.round = 2;
      return n;
    }
  }
  return n;
}

std::optional<Outcome> Session::consensus(const std::string& item_id) const {
  std::lock_guard lock(mu_);
  if (!item_index_.count(item_id)) throw SessionError("unknown item " + item_id);
  return consensus_locked(item_id);
}

Json Session::report() const {
  std::lock_guard lock(mu_);
  Json rep{{"session_id", id_},
           {"method_a", method_a_},
           {"method_b", method_b_},
           {"closed", closed_},
           {"n_items", items_.size()},
           {"annotators", annotators_},
           {"dimensions", Json::object()}};
  for (const auto dim : {Dimension::SA, Dimension::SC}) {
    std::vector<const ComparisonItem*> dim_items;
    for (const auto& it : items_)
      if (it.dimension == dim) dim_items.push_back(&it);
    if (dim_items.empty()) continue;
    std::vector<ResolvedItem> resolved;
    agree::Ratings ratings(annotators_.size(),
                           std::vector<std::optional<int>>(dim_items.size()));
    for (std::size_t i = 0; i < dim_items.size(); ++i) {
      const auto& it = *dim_items[i];
      if (auto o = consensus_locked(it.item_id))
        resolved.push_back({*o, it.side_a.source, it.side_b.source});
      auto v = votes_.find({it.item_id, 1});
      if (v == votes_.end()) continue;
      for (std::size_t a = 0; a < annotators_.size(); ++a) {
        auto c = v->second.find(annotators_[a]);
        if (c != v->second.end()) ratings[a][i] = static_cast<int>(c->second);
      }
    }
    Json d{{"n_items", dim_items.size()}, {"n_resolved", resolved.size()}};
    if (!resolved.empty()) {
      for (const auto& m : {method_a_, method_b_}) {
        const auto wr = win_rate(resolved, m);
        d["win_rate"][m] = {{"win", wr.win}, {"lose", wr.lose}, {"tie", wr.tie}, {"n", wr.n}};
      }
    }
    if (annotators_.size() >= 2)
      d["agreement"] = agree::to_json(agree::agreement_report(to_string(dim), ratings, agree::Level::Nominal));
    rep["dimensions"][to_string(dim)] = d;
  }
  Json progress = Json::object();
  for (const auto& a : annotators_) {
    std::size_t done = 0;
    for (const auto& it : items_) {
      auto v = votes_.find({it.item_id, 1});
      if (v != votes_.end() && v->second.count(a)) ++done;
    }
    progress[a] = done;
  }
  rep["progress"] = progress;
  return rep;
}

}  // namespace buzzdef::human
