// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/resources.hpp"

#include <map>
#include <stdexcept>
#include <string_view>

#include "buzzdef/jsonl.hpp"

namespace buzzdef {

namespace detail {
const std::map<std::string, std::string_view>& builtin_resource_table();
}  // namespace detail

namespace {

std::string strip_one_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::string builtin_resource(const std::string& name) {
  const auto& table = detail::builtin_resource_table();
  auto it = table.find(name);
  if (it == table.end()) throw std::out_of_range("no builtin resource: " + name);
  return strip_one_newline(std::string(it->second));
}

std::string load_resource(const std::optional<std::filesystem::path>& dir,
                          const std::string& name) {
  if (dir) {
    const auto p = *dir / name;
    if (std::filesystem::exists(p)) return strip_one_newline(read_file(p));
  }
  return builtin_resource(name);
}

}  // namespace buzzdef
