// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace buzzdef {

/// Loads a compiled-in template or lexicon file by basename ("aspect.txt").
/// A single trailing newline is stripped from templates.
std::string builtin_resource(const std::string& name);

/// Looks for `name` in `dir` first and falls back to the builtin copy.
std::string load_resource(const std::optional<std::filesystem::path>& dir,
                          const std::string& name);

}  // namespace buzzdef
