// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/external_adapter.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include <httplib.h>

#include "buzzdef/http_provider.hpp"

namespace buzzdef::gen {

Json adapter_request(const std::string& word, const std::vector<std::string>& examples) {
  return Json{{"word", word}, {"examples", examples}};
}

AspectCandidate parse_adapter_reply(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw AdapterError("adapter reply is not a record");
  if (!j.contains("definition") || !j["definition"].is_string())
    throw AdapterError("adapter reply lacks a string 'definition'");
  AspectCandidate c;
  c.definition = j["definition"].get<std::string>();
  if (c.definition.empty()) throw AdapterError("adapter returned an empty definition");
  if (j.contains("reason")) {
    if (!j["reason"].is_string()) throw AdapterError("adapter 'reason' is not a string");
    c.reason = j["reason"].get<std::string>();
  }
  return c;
}

SubprocessAdapter::SubprocessAdapter(std::vector<std::string> argv, std::chrono::seconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty()) throw std::invalid_argument("subprocess adapter needs a command");
}

AspectCandidate SubprocessAdapter::run(const std::string& word,
                                       const std::vector<std::string>& examples) {
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw AdapterError(std::string("pipe: ") + std::strerror(errno));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw AdapterError(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) {
    const int err = errno;
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw AdapterError(std::string("fork: ") + std::strerror(err));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  const std::string line = adapter_request(word, examples).dump() + "\n";
  // A child that exits without reading stdin must not kill us with SIGPIPE.
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { signal(SIGPIPE, SIG_IGN); });
  for (std::size_t off = 0; off < line.size();) {
    const auto n = write(in_pipe[1], line.data() + off, line.size() - off);
    if (n <= 0) break;
    off += static_cast<std::size_t>(n);
  }
  close(in_pipe[1]);

  std::string out;
  char buf[4096];
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  bool timed_out = false;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd p{out_pipe[0], POLLIN, 0};
    const int pr = poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (pr < 0 && errno == EINTR) continue;
    if (pr == 0) continue;
    const auto n = read(out_pipe[0], buf, sizeof buf);
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  close(out_pipe[0]);
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out) throw AdapterError("adapter timed out: " + argv_[0]);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw AdapterError("adapter exited abnormally: " + argv_[0] + " (status " +
                       std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")");
  const auto nl = out.find('\n');
  return parse_adapter_reply(nl == std::string::npos ? out : out.substr(0, nl));
}

HttpAdapter::HttpAdapter(std::string url, std::chrono::seconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

AspectCandidate HttpAdapter::run(const std::string& word, const std::vector<std::string>& examples) {
  const auto u = llm::split_url(url_);
  httplib::Client cli(u.origin);
  cli.set_read_timeout(timeout_);
  auto res = cli.Post(u.path, adapter_request(word, examples).dump(), "application/json");
  if (!res) throw AdapterError("adapter unreachable: " + url_);
  if (res->status != 200) throw AdapterError("adapter returned HTTP " + std::to_string(res->status));
  return parse_adapter_reply(res->body);
}

std::map<std::string, std::shared_ptr<MethodAdapter>> adapters_from_json(const Json& j) {
  std::map<std::string, std::shared_ptr<MethodAdapter>> out;
  if (!j.is_object()) return out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    const auto type = v.value("type", std::string("subprocess"));
    if (type == "subprocess") {
      out[it.key()] = std::make_shared<SubprocessAdapter>(v.at("argv").get<std::vector<std::string>>());
    } else if (type == "http") {
      out[it.key()] = std::make_shared<HttpAdapter>(v.at("url").get<std::string>());
    } else {
      throw std::invalid_argument("adapter '" + it.key() + "': unknown type " + type);
    }
  }
  return out;
}

}  // namespace buzzdef::gen
