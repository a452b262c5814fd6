// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "buzzdef/humaneval.hpp"

namespace buzzdef::human {

/// SessionSpec from a POST /sessions body.
SessionSpec session_spec_from_json(const Json& j);

/// HTTP front for pairwise sessions:
///   POST /sessions                      create, body is a SessionSpec record
///   GET  /sessions/{id}/next?annotator= next item for that annotator
///   POST /verdicts                      {session_id, item_id, annotator_id, choice, round?}
///   GET  /sessions/{id}/report          win rates, agreement, progress
///   POST /sessions/{id}/close
class HumanEvalServer {
 public:
  /// New session logs are written to `session_dir/<id>.jsonl`.
  explicit HumanEvalServer(std::filesystem::path session_dir);
  ~HumanEvalServer();
  HumanEvalServer(const HumanEvalServer&) = delete;
  HumanEvalServer& operator=(const HumanEvalServer&) = delete;

  void add_session(std::unique_ptr<Session> s);
  Session* session(const std::string& id);

  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace buzzdef::human
