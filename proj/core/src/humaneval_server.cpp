// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/humaneval_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "buzzdef/digest.hpp"

namespace buzzdef::human {

SessionSpec session_spec_from_json(const Json& j) {
  SessionSpec s;
  s.session_id = j.value("session_id", std::string());
  s.method_a = j.at("method_a").get<std::string>();
  s.method_b = j.at("method_b").get<std::string>();
  s.definitions_a = j.at("definitions_a").get<std::map<std::string, std::string>>();
  s.definitions_b = j.at("definitions_b").get<std::map<std::string, std::string>>();
  s.gold = j.at("gold").get<std::map<std::string, std::string>>();
  s.sample = j.value("sample", std::size_t{100});
  s.seed = j.value("seed", std::uint64_t{0});
  s.annotators = j.at("annotators").get<std::vector<std::string>>();
  if (j.contains("dimensions")) {
    s.dimensions.clear();
    for (const auto& d : j["dimensions"]) s.dimensions.push_back(dimension_from_string(d.get<std::string>()));
  }
  return s;
}

namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& kind, const std::string& msg) {
  reply(res, status, Json{{"error", kind}, {"message", msg}});
}

int status_for(RejectReason r) {
  switch (r) {
    case RejectReason::UnknownItem: return 404;
    case RejectReason::UnknownAnnotator: return 403;
    default: return 409;
  }
}

}  // namespace

struct HumanEvalServer::Impl {
  std::filesystem::path dir;
  httplib::Server server;
  std::mutex mu;
  std::map<std::string, std::unique_ptr<Session>> sessions;

  Session* find(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second.get();
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return error(res, 400, "bad_request", "body is not a record");
      SessionSpec spec;
      try {
        spec = session_spec_from_json(body);
      } catch (const std::exception& e) {
        return error(res, 400, "bad_request", e.what());
      }
      if (spec.session_id.empty()) spec.session_id = "s" + sha256_hex(body.dump()).substr(0, 12);
      if (!valid_id(spec.session_id)) return error(res, 400, "bad_request", "invalid session id");
      std::lock_guard lock(mu);
      if (sessions.count(spec.session_id)) return error(res, 409, "exists", "session already exists");
      try {
        auto s = Session::create(spec, dir / (spec.session_id + ".jsonl"));
        const auto n = s->items().size();
        sessions[spec.session_id] = std::move(s);
        reply(res, 201, Json{{"session_id", spec.session_id}, {"n_items", n}});
      } catch (const SessionError& e) {
        error(res, 400, "bad_request", e.what());
      }
    });

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/next)", [this](const httplib::Request& req,
                                                           httplib::Response& res) {
      auto* s = find(req.matches[1]);
      if (!s) return error(res, 404, "unknown_session", "no such session");
      if (!req.has_param("annotator")) return error(res, 400, "bad_request", "annotator parameter required");
      try {
        const auto n = s->next_item(req.get_param_value("annotator"));
        reply(res, 200, Json{{"item", n.item ? to_client_json(*n.item) : Json(nullptr)},
                             {"round", n.round},
                             {"done", n.done},
                             {"total", n.total}});
      } catch (const VerdictRejected& e) {
        error(res, status_for(e.reason()), to_string(e.reason()), e.what());
      }
    });

    server.Post("/verdicts", [this](const httplib::Request& req, httplib::Response& res) {
      Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return error(res, 400, "bad_request", "body is not a record");
      Verdict v;
      std::string sid;
      try {
        sid = body.at("session_id").get<std::string>();
        v = verdict_from_json(body);
        v.timestamp.clear();  // server clock only
      } catch (const std::exception& e) {
        return error(res, 400, "bad_request", e.what());
      }
      auto* s = find(sid);
      if (!s) return error(res, 404, "unknown_session", "no such session");
      try {
        s->record_verdict(v);
        reply(res, 201, Json{{"status", "stored"}, {"item_id", v.item_id}});
      } catch (const VerdictRejected& e) {
        error(res, status_for(e.reason()), to_string(e.reason()), e.what());
      }
    });

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/report)", [this](const httplib::Request& req,
                                                             httplib::Response& res) {
      auto* s = find(req.matches[1]);
      if (!s) return error(res, 404, "unknown_session", "no such session");
      reply(res, 200, s->report());
    });

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/close)", [this](const httplib::Request& req,
                                                             httplib::Response& res) {
      auto* s = find(req.matches[1]);
      if (!s) return error(res, 404, "unknown_session", "no such session");
      s->close();
      reply(res, 200, Json{{"status", "closed"}});
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      spdlog::error("humaneval request failed: {}", msg);
      error(res, 500, "internal", msg);
    });
  }
};

HumanEvalServer::HumanEvalServer(std::filesystem::path session_dir) : impl_(std::make_unique<Impl>()) {
  impl_->dir = std::move(session_dir);
  std::filesystem::create_directories(impl_->dir);
  impl_->routes();
}

HumanEvalServer::~HumanEvalServer() { stop(); }

void HumanEvalServer::add_session(std::unique_ptr<Session> s) {
  std::lock_guard lock(impl_->mu);
  const auto id = s->id();
  if (impl_->sessions.count(id)) throw SessionError("session already loaded: " + id);
  impl_->sessions[id] = std::move(s);
}

Session* HumanEvalServer::session(const std::string& id) { return impl_->find(id); }

int HumanEvalServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HumanEvalServer::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

bool HumanEvalServer::serve() { return impl_->server.listen_after_bind(); }

void HumanEvalServer::stop() {
  if (impl_) impl_->server.stop();
}

void HumanEvalServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace buzzdef::human
