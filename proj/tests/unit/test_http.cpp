// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

// Wire-level tests against local httplib servers: the embedding client,
// the chat provider, the HTTP method adapter and the human-evaluation API.

#include <gtest/gtest.h>

#include <thread>

// Eigen first: resolv.h, pulled in by httplib, defines _res.
#include "buzzdef/embedding.hpp"
#include "buzzdef/external_adapter.hpp"
#include "buzzdef/http_provider.hpp"
#include "buzzdef/humaneval_server.hpp"
#include "buzzdef/llm_gateway.hpp"
#include "buzzdef/text.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace buzzdef;
using buzzdef::testing::TempDir;

namespace {

// Runs an httplib::Server on an ephemeral port for the lifetime of the object.
class Stub {
 public:
  Stub() = default;
  ~Stub() { stop(); }
  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void stop() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

Json embed_reply(const Json& req) {
  Json results = Json::array();
  const bool pooled = req.at("mode") == "pooled";
  for (const auto& t : req.at("texts")) {
    const auto scalars = text::split_scalars(t.get<std::string>());
    if (pooled) {
      const auto v = embed::HashEmbeddingProvider::hash_vector(t.get<std::string>(), 4);
      results.push_back(Json{{"vector", std::vector<double>(v.data(), v.data() + v.size())}});
      continue;
    }
    Json toks = Json::array({"[CLS]"}), vecs = Json::array(), mask = Json::array({true});
    vecs.push_back(std::vector<double>{0, 0, 0, 1});
    for (const auto& s : scalars) {
      toks.push_back(s);
      const auto v = embed::HashEmbeddingProvider::hash_vector(s, 4);
      vecs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
      mask.push_back(false);
    }
    toks.push_back("[SEP]");
    vecs.push_back(std::vector<double>{0, 0, 1, 0});
    mask.push_back(true);
    results.push_back(Json{{"tokens", toks}, {"vectors", vecs}, {"special_token_mask", mask}});
  }
  return Json{{"results", results}};
}

}  // namespace

TEST(EmbeddingClient, TokensPooledAndHealth) {
  Stub stub;
  std::atomic<int> posts{0};
  std::vector<std::size_t> batch_sizes;
  std::mutex mu;
  stub.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++posts;
    const auto j = Json::parse(req.body);
    {
      std::lock_guard lock(mu);
      batch_sizes.push_back(j["texts"].size());
    }
    res.set_content(embed_reply(j).dump(), "application/json");
  });
  stub.server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok","model_digest":"sha256:abc","dim":4})", "application/json");
  });
  stub.start();

  embed::HttpEmbeddingProvider client(stub.url() + "/", std::chrono::seconds(5), 2);
  const auto h = client.health();
  EXPECT_EQ(h.model_digest, "sha256:abc");
  EXPECT_EQ(h.dim, 4u);

  const auto toks = client.tokens({"网红", "打卡了", "躺"});
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[1].tokens.size(), 5u);
  EXPECT_TRUE(toks[1].special_mask.front());
  EXPECT_FALSE(toks[1].special_mask[1]);
  EXPECT_EQ(toks[1].tokens[1], "打");
  EXPECT_EQ(batch_sizes, (std::vector<std::size_t>{2, 1}));

  const auto pooled = client.pooled({"网红"});
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_EQ(pooled[0].size(), 4);
  EXPECT_EQ(pooled[0], embed::HashEmbeddingProvider::hash_vector("网红", 4));
}

TEST(EmbeddingClient, CachingWrapperSkipsRepeatRequests) {
  Stub stub;
  std::atomic<int> posts{0};
  stub.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++posts;
    res.set_content(embed_reply(Json::parse(req.body)).dump(), "application/json");
  });
  stub.server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"model_digest":"d1","dim":4})", "application/json");
  });
  stub.start();
  TempDir dir;
  auto inner = std::make_shared<embed::HttpEmbeddingProvider>(stub.url());
  {
    embed::CachingEmbeddingProvider cache(inner, dir.path());
    const auto a = cache.pooled({"x", "y", "x"});
    const auto b = cache.pooled({"y", "x"});
    EXPECT_EQ(a[0], b[1]);
    EXPECT_EQ(cache.inner_calls(), 1u);
  }
  embed::CachingEmbeddingProvider warm(inner, dir.path());
  warm.pooled({"x", "y"});
  EXPECT_EQ(warm.inner_calls(), 0u);
  EXPECT_EQ(posts.load(), 1);
}

TEST(EmbeddingClient, ErrorsSurfaceAsEmbeddingError) {
  Stub stub;
  stub.server.Post("/embed", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  stub.server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"dim":4})", "application/json");
  });
  stub.start();
  embed::HttpEmbeddingProvider client(stub.url(), std::chrono::seconds(2));
  EXPECT_THROW(client.tokens({"x"}), embed::EmbeddingError);
  EXPECT_THROW(client.health(), embed::EmbeddingError);
  stub.stop();
  EXPECT_THROW(client.pooled({"x"}), embed::EmbeddingError);
}

TEST(EmbeddingClient, ResponseValidation) {
  EXPECT_THROW(embed::parse_tokens_response(R"({"results":[]})", 1), embed::EmbeddingError);
  EXPECT_THROW(embed::parse_tokens_response(R"({"results":[{"tokens":["a","b"],"vectors":[[1]]}]})", 1),
               embed::EmbeddingError);
  EXPECT_THROW(embed::parse_tokens_response(
                   R"({"results":[{"tokens":["a","b"],"vectors":[[1],[1,2]]}]})", 1),
               embed::EmbeddingError);
  const auto ok = embed::parse_tokens_response(R"({"results":[{"tokens":["a"],"vectors":[[1,2]]}]})", 1);
  EXPECT_FALSE(ok[0].special_mask[0]);
  EXPECT_THROW(embed::parse_pooled_response(R"({"results":[{}]})", 1), embed::EmbeddingError);
  EXPECT_THROW(embed::parse_health_response("not json"), embed::EmbeddingError);
}

TEST(HttpChat, RetriesServerErrorsThroughGateway) {
  Stub stub;
  std::atomic<int> hits{0};
  std::string auth;
  stub.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    const auto j = Json::parse(req.body);
    const Json msg{{"content", "echo:" + j["messages"][0]["content"].get<std::string>()}};
    const Json choice{{"message", msg}};
    res.set_content(Json{{"choices", Json::array({choice})}}.dump(), "application/json");
  });
  stub.start();
  ::setenv("BUZZDEF_TEST_KEY", "sekrit", 1);
  auto cfg = llm::gateway_config_from_json(
      Json{{"backbones", {{"h", {{"endpoint", stub.url() + "/v1/chat"}, {"auth_env", "BUZZDEF_TEST_KEY"}}}}}});
  llm::Gateway gw(cfg);
  gw.set_sleeper([](std::chrono::milliseconds) {});
  llm::LlmRequest r;
  r.backbone_id = "h";
  r.prompt = "你好";
  const auto res = gw.complete(r);
  EXPECT_EQ(res.text, "echo:你好");
  EXPECT_EQ(res.attempt, 3);
  EXPECT_EQ(auth, "Bearer sekrit");
}

TEST(HttpChat, MissingKeyIsPermanent) {
  auto cfg = llm::gateway_config_from_json(
      Json{{"backbones", {{"h", {{"endpoint", "http://127.0.0.1:9/x"}, {"auth_env", "BUZZDEF_UNSET_KEY_42"}}}}}});
  llm::Gateway gw(cfg);
  std::size_t sleeps = 0;
  gw.set_sleeper([&](std::chrono::milliseconds) { ++sleeps; });
  llm::LlmRequest r;
  r.backbone_id = "h";
  r.prompt = "p";
  EXPECT_THROW(gw.complete(r), llm::ProviderError);
  EXPECT_EQ(sleeps, 0u);
}

TEST(HttpAdapter, PostsWordAndExamples) {
  Stub stub;
  stub.server.Post("/gen", [](const httplib::Request& req, httplib::Response& res) {
    const auto j = Json::parse(req.body);
    res.set_content(Json{{"definition", j["word"].get<std::string>() + ":" + std::to_string(j["examples"].size())},
                         {"reason", "r"}}
                        .dump(),
                    "application/json");
  });
  stub.start();
  gen::HttpAdapter a(stub.url() + "/gen");
  const auto c = a.run("躺平", {"a", "b"});
  EXPECT_EQ(c.definition, "躺平:2");
  EXPECT_EQ(c.reason, "r");
}

// Human-evaluation API -------------------------------------------------------

namespace {

struct HumanEvalRig {
  explicit HumanEvalRig(const std::filesystem::path& dir) : server(dir) {
    port = server.bind_any("127.0.0.1");
    thread = std::thread([this] { server.serve(); });
    server.wait_until_ready();
  }
  ~HumanEvalRig() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(5);
    return c;
  }
  human::HumanEvalServer server;
  int port = 0;
  std::thread thread;
};

Json session_body(std::size_t n_words, std::size_t sample) {
  Json a = Json::object(), b = Json::object(), g = Json::object();
  for (std::size_t i = 0; i < n_words; ++i) {
    const auto w = "w" + std::to_string(i);
    a[w] = "甲释义" + w;
    b[w] = "乙释义" + w;
    g[w] = "gold-" + w;
  }
  return Json{{"session_id", "pilot"}, {"method_a", "ress"}, {"method_b", "focus"},
              {"definitions_a", a},    {"definitions_b", b}, {"gold", g},
              {"sample", sample},      {"seed", 3},           {"annotators", {"ann1", "ann2"}},
              {"dimensions", {"SA"}}};
}

Json post(httplib::Client& c, const std::string& path, const Json& body, int expect) {
  auto r = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(r);
  if (!r) return Json();
  EXPECT_EQ(r->status, expect) << path << " " << r->body;
  return Json::parse(r->body, nullptr, false);
}

Json get(httplib::Client& c, const std::string& path, int expect) {
  auto r = c.Get(path);
  EXPECT_TRUE(r);
  if (!r) return Json();
  EXPECT_EQ(r->status, expect) << path << " " << r->body;
  return Json::parse(r->body, nullptr, false);
}

}  // namespace

TEST(HumanEvalApi, FullSessionOverTheWire) {
  TempDir dir;
  HumanEvalRig rig(dir.path());
  auto c = rig.client();

  const auto created = post(c, "/sessions", session_body(12, 10), 201);
  EXPECT_EQ(created["session_id"], "pilot");
  EXPECT_EQ(created["n_items"], 10);
  post(c, "/sessions", session_body(12, 10), 409);

  std::size_t stored = 0;
  for (const std::string ann : {"ann1", "ann2"}) {
    for (;;) {
      const auto next = get(c, "/sessions/pilot/next?annotator=" + ann, 200);
      if (next["item"].is_null()) break;
      const auto& item = next["item"];
      // No method identifier ever reaches the client.
      const auto wire = item.dump();
      EXPECT_EQ(wire.find("ress"), std::string::npos);
      EXPECT_EQ(wire.find("focus"), std::string::npos);
      EXPECT_FALSE(item.contains("source_a"));
      EXPECT_TRUE(item.contains("definition_a"));
      const std::string choice = item["definition_a"].get<std::string>().rfind("甲", 0) == 0 ? "A" : "B";
      post(c, "/verdicts",
           Json{{"session_id", "pilot"}, {"item_id", item["item_id"]}, {"annotator_id", ann}, {"choice", choice}},
           201);
      ++stored;
    }
  }
  EXPECT_EQ(stored, 20u);

  const auto rep = get(c, "/sessions/pilot/report", 200);
  const auto& sa = rep["dimensions"]["SA"];
  EXPECT_EQ(sa["n_resolved"], 10);
  EXPECT_DOUBLE_EQ(sa["win_rate"]["ress"]["win"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(sa["win_rate"]["focus"]["lose"].get<double>(), 1.0);
  post(c, "/sessions/pilot/close", Json::object(), 200);
  const auto item_id = rig.server.session("pilot")->items().front().item_id;
  const auto closed = post(c, "/verdicts",
                           Json{{"session_id", "pilot"}, {"item_id", item_id}, {"annotator_id", "ann1"}, {"choice", "A"}},
                           409);
  EXPECT_EQ(closed["error"], "closed");
}

TEST(HumanEvalApi, ErrorStatuses) {
  TempDir dir;
  HumanEvalRig rig(dir.path());
  auto c = rig.client();
  post(c, "/sessions", Json::parse("[1]"), 400);
  post(c, "/sessions", Json{{"method_a", "x"}}, 400);
  auto bad_id = session_body(3, 2);
  bad_id["session_id"] = "../etc";
  post(c, "/sessions", bad_id, 400);
  auto too_big = session_body(3, 5);
  post(c, "/sessions", too_big, 400);

  post(c, "/sessions", session_body(3, 2), 201);
  get(c, "/sessions/nope/next?annotator=ann1", 404);
  get(c, "/sessions/pilot/next", 400);
  EXPECT_EQ(get(c, "/sessions/pilot/next?annotator=mallory", 403)["error"], "unknown_annotator");

  const auto item_id = rig.server.session("pilot")->items().front().item_id;
  const Json v{{"session_id", "pilot"}, {"item_id", item_id}, {"annotator_id", "ann1"}, {"choice", "Tie"}};
  post(c, "/verdicts", v, 201);
  EXPECT_EQ(post(c, "/verdicts", v, 409)["error"], "duplicate");
  auto unknown_item = v;
  unknown_item["item_id"] = "9999-SA";
  EXPECT_EQ(post(c, "/verdicts", unknown_item, 404)["error"], "unknown_item");
  auto unknown_session = v;
  unknown_session["session_id"] = "zzz";
  post(c, "/verdicts", unknown_session, 404);
  auto bad_choice = v;
  bad_choice["choice"] = "C";
  post(c, "/verdicts", bad_choice, 400);
  auto round2 = v;
  round2["round"] = 2;
  round2["annotator_id"] = "ann2";
  EXPECT_EQ(post(c, "/verdicts", round2, 409)["error"], "round_not_open");
}

TEST(HumanEvalApi, DuplicateSubmitRaceStoresOne) {
  TempDir dir;
  HumanEvalRig rig(dir.path());
  {
    auto c = rig.client();
    post(c, "/sessions", session_body(4, 2), 201);
  }
  const auto item_id = rig.server.session("pilot")->items().front().item_id;
  const Json v{{"session_id", "pilot"}, {"item_id", item_id}, {"annotator_id", "ann1"}, {"choice", "A"}};
  std::atomic<int> created{0}, conflicts{0};
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i)
    ts.emplace_back([&] {
      auto c = rig.client();
      auto r = c.Post("/verdicts", v.dump(), "application/json");
      if (r && r->status == 201) ++created;
      if (r && r->status == 409) ++conflicts;
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(created.load(), 1);
  EXPECT_EQ(conflicts.load(), 5);
  std::size_t lines = 0;
  for_each_line(dir / "pilot.jsonl", [&](std::size_t, std::string_view l) {
    if (l.find("\"verdict\"") != std::string_view::npos) ++lines;
  });
  EXPECT_EQ(lines, 1u);
}

TEST(HumanEvalApi, SessionsResumeFromLog) {
  TempDir dir;
  std::string first;
  {
    HumanEvalRig rig(dir.path());
    auto c = rig.client();
    post(c, "/sessions", session_body(5, 3), 201);
    const auto n = get(c, "/sessions/pilot/next?annotator=ann1", 200);
    first = n["item"]["item_id"];
    post(c, "/verdicts", Json{{"session_id", "pilot"}, {"item_id", first}, {"annotator_id", "ann1"}, {"choice", "B"}}, 201);
  }
  HumanEvalRig rig(dir.path());
  rig.server.add_session(human::Session::open(dir / "pilot.jsonl"));
  auto c = rig.client();
  const auto n = get(c, "/sessions/pilot/next?annotator=ann1", 200);
  EXPECT_EQ(n["done"], 1);
  EXPECT_EQ(n["total"], 3);
  EXPECT_NE(n["item"]["item_id"], first);
}
