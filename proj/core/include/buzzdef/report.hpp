// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "buzzdef/benchmark.hpp"

namespace buzzdef::report {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (unseen - seen) / seen in percent; nullopt when either side is missing or
/// seen is zero.
std::optional<double> relative_delta(const std::optional<double>& seen,
                                     const std::optional<double>& unseen);

struct Rendered {
  Json json;
  std::string markdown;
};

/// Records must share one corpus.
Rendered render_report(const std::vector<bench::RunRecord>& records);

/// Writes report.json and report.md into `out_dir`.
Rendered write_report(const std::vector<bench::RunRecord>& records, const std::filesystem::path& out_dir);

/// Every `<dir>/report.json`, or `<dir>/*/report.json` one level down.
std::vector<bench::RunRecord> load_records(const std::vector<std::filesystem::path>& dirs);

}  // namespace buzzdef::report
