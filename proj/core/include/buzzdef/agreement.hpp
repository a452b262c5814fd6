// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "buzzdef/jsonl.hpp"

namespace buzzdef::agree {

enum class Level { Nominal, Ordinal };
std::string to_string(Level l);
Level level_from_string(const std::string& s);

/// ratings[annotator][item]; nullopt marks a missing cell.
using Ratings = std::vector<std::vector<std::optional<int>>>;

struct AlphaResult {
  std::optional<double> alpha;  // nullopt when expected disagreement is zero
  double observed = 0.0;        // D_o
  double expected = 0.0;        // D_e
  std::size_t pairable_values = 0;
  std::string note;
};

/// Coincidence-matrix alpha. Units with fewer than two values are ignored.
/// Ordinal distance uses the marginal-count rank form over the observed
/// values. Throws std::invalid_argument on ragged input or < 2 annotators.
AlphaResult krippendorff_alpha(const Ratings& ratings, Level level);

struct RawAgreement {
  double by_items = 0.0;      // items where every rating agrees / items with >= 2 ratings
  double by_decisions = 0.0;  // agreeing annotator pairs / all annotator pairs
  std::size_t items = 0;
  std::size_t pairs = 0;
};

RawAgreement raw_agreement(const Ratings& ratings);

struct AgreementReport {
  std::string dimension;
  Level level = Level::Nominal;
  AlphaResult alpha;
  RawAgreement raw;
  std::size_t n_items = 0;
  std::size_t n_annotators = 0;
};

AgreementReport agreement_report(const std::string& dimension, const Ratings& ratings, Level level);
Json to_json(const AgreementReport& r);

}  // namespace buzzdef::agree
