// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/agreement.hpp"

#include <map>
#include <stdexcept>

namespace buzzdef::agree {

std::string to_string(Level l) { return l == Level::Nominal ? "nominal" : "ordinal"; }

Level level_from_string(const std::string& s) {
  if (s == "nominal") return Level::Nominal;
  if (s == "ordinal") return Level::Ordinal;
  throw std::invalid_argument("unknown measurement level: " + s);
}

namespace {

std::size_t check_shape(const Ratings& r) {
  if (r.size() < 2) throw std::invalid_argument("alpha needs at least two annotators");
  const std::size_t n = r.front().size();
  for (const auto& row : r)
    if (row.size() != n) throw std::invalid_argument("ratings rows differ in length");
  return n;
}

}  // namespace

AlphaResult krippendorff_alpha(const Ratings& ratings, Level level) {
  const std::size_t items = check_shape(ratings);
  std::map<int, std::size_t> index;
  for (const auto& row : ratings)
    for (const auto& v : row)
      if (v) index.emplace(*v, 0);
  std::size_t k = 0;
  for (auto& [value, i] : index) i = k++;

  // o[c][d]: each ordered pair of values within a unit weighs 1 / (m_u - 1).
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  AlphaResult res;
  for (std::size_t u = 0; u < items; ++u) {
    std::vector<std::size_t> vals;
    for (const auto& row : ratings)
      if (row[u]) vals.push_back(index.at(*row[u]));
    if (vals.size() < 2) continue;
    res.pairable_values += vals.size();
    const double w = 1.0 / static_cast<double>(vals.size() - 1);
    for (std::size_t a = 0; a < vals.size(); ++a)
      for (std::size_t b = 0; b < vals.size(); ++b)
        if (a != b) o[vals[a]][vals[b]] += w;
  }
  std::vector<double> nc(k, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) nc[c] += o[c][d];
    n += nc[c];
  }
  if (n < 2.0) {
    res.note = "undefined, fewer than two pairable values";
    return res;
  }

  auto delta = [&](std::size_t c, std::size_t d) -> double {
    if (c == d) return 0.0;
    if (level == Level::Nominal) return 1.0;
    const std::size_t lo = std::min(c, d), hi = std::max(c, d);
    double s = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) s += nc[g];
    s -= (nc[c] + nc[d]) / 2.0;
    return s * s;
  };

  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      const double dl = delta(c, d);
      num += o[c][d] * dl;
      den += nc[c] * nc[d] * dl;
    }
  }
  res.observed = num / n;
  res.expected = den / (n * (n - 1.0));
  if (res.expected == 0.0) {
    res.note = "undefined, perfect homogeneity";
    return res;
  }
  res.alpha = 1.0 - res.observed / res.expected;
  return res;
}

RawAgreement raw_agreement(const Ratings& ratings) {
  const std::size_t items = check_shape(ratings);
  RawAgreement r;
  std::size_t agree_items = 0, agree_pairs = 0;
  for (std::size_t u = 0; u < items; ++u) {
    std::vector<int> vals;
    for (const auto& row : ratings)
      if (row[u]) vals.push_back(*row[u]);
    if (vals.size() < 2) continue;
    ++r.items;
    bool all = true;
    for (std::size_t a = 0; a < vals.size(); ++a) {
      for (std::size_t b = a + 1; b < vals.size(); ++b) {
        ++r.pairs;
        if (vals[a] == vals[b]) {
          ++agree_pairs;
        } else {
          all = false;
        }
      }
    }
    if (all) ++agree_items;
  }
  if (r.items) r.by_items = static_cast<double>(agree_items) / static_cast<double>(r.items);
  if (r.pairs) r.by_decisions = static_cast<double>(agree_pairs) / static_cast<double>(r.pairs);
  return r;
}

AgreementReport agreement_report(const std::string& dimension, const Ratings& ratings, Level level) {
  AgreementReport rep;
  rep.dimension = dimension;
  rep.level = level;
  rep.alpha = krippendorff_alpha(ratings, level);
  rep.raw = raw_agreement(ratings);
  rep.n_items = rep.raw.items;
  rep.n_annotators = ratings.size();
  return rep;
}

Json to_json(const AgreementReport& r) {
  return Json{{"dimension", r.dimension},
              {"level", to_string(r.level)},
              {"alpha", r.alpha.alpha ? Json(*r.alpha.alpha) : Json(nullptr)},
              {"alpha_note", r.alpha.note},
              {"observed_disagreement", r.alpha.observed},
              {"expected_disagreement", r.alpha.expected},
              {"raw_agreement_items", r.raw.by_items},
              {"raw_agreement_decisions", r.raw.by_decisions},
              {"n_items", r.n_items},
              {"n_annotators", r.n_annotators}};
}

}  // namespace buzzdef::agree
