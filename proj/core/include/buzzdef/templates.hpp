// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace buzzdef::tmpl {

// Placeholder names as they appear in the shipped templates.
inline constexpr std::string_view kBuzzword = "[BUZZWORD]";
inline constexpr std::string_view kAspect = "[INPUT_ASPECT]";
inline constexpr std::string_view kAspectExplanation = "[INPUT_ASPECT_EXPLANATION]";
inline constexpr std::string_view kExamples = "[EXAMPLES]";
inline constexpr std::string_view kUgc = "[UGC_SENTENCES]";
inline constexpr std::string_view kCandidates = "[CANDIDATE_DEFINITION]";
inline constexpr std::string_view kPredicted = "[PREDICTED_DEFINITION]";
inline constexpr std::string_view kGold = "[GROUND_TRUTH_DEFINITION]";

using Bindings = std::map<std::string, std::string, std::less<>>;

struct SlotSpan {
  std::string placeholder;
  std::size_t begin = 0;  // byte offsets into Rendered::text
  std::size_t end = 0;
};

struct Rendered {
  std::string text;
  std::vector<SlotSpan> slots;  // in text order
};

/// Single left-to-right pass: every bound placeholder is replaced by its
/// value; unbound bracketed text stays literal and substituted values are
/// never rescanned.
Rendered render(std::string_view tmpl, const Bindings& bindings);

/// Puts the placeholder names back in place of the filled slots.
std::string unrender(const Rendered& r);

/// Loads a template from `dir` if present there, else the compiled-in copy.
std::string load_template(const std::optional<std::filesystem::path>& dir, const std::string& name);

}  // namespace buzzdef::tmpl
