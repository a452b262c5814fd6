// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace buzzdef {

using Json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls fn(line_number, line) for each non-blank line (1-based numbering).
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
void append_jsonl(const std::filesystem::path& path, const Json& row);

/// Compact single-line dump that keeps non-ASCII text as UTF-8.
std::string dump_line(const Json& j);

}  // namespace buzzdef
