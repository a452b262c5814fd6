// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

// Brute-force oracles and synthetic fixtures shared by the unit tests and
// the acceptance binary. Nothing here calls into the library's metric code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "buzzdef/corpus.hpp"
#include "buzzdef/random.hpp"

namespace buzzdef::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("buzzdef-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

using Tokens = std::vector<std::string>;

// Occurrences of tokens[pos, pos+n) in seq, by scanning every window.
inline std::size_t count_window(const Tokens& seq, const Tokens& src, std::size_t pos, std::size_t n) {
  std::size_t c = 0;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < n && eq; ++k) eq = seq[i + k] == src[pos + k];
    c += eq;
  }
  return c;
}

// Sentence BLEU with one reference, exhaustive n-gram counting. Smoothing:
// orders with no candidate n-grams count as 1, zero matches at n >= 2 get
// 1/(total+1), a zero unigram precision gives 0.
inline double oracle_bleu(const Tokens& cand, const Tokens& ref, int max_n = 4) {
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (cand.size() < un) continue;  // p = 1
    std::size_t total = cand.size() - un + 1, matched = 0;
    for (std::size_t i = 0; i + un <= cand.size(); ++i) {
      bool first = true;
      for (std::size_t j = 0; j < i && first; ++j) {
        bool eq = true;
        for (std::size_t k = 0; k < un && eq; ++k) eq = cand[j + k] == cand[i + k];
        if (eq) first = false;
      }
      if (!first) continue;
      matched += std::min(count_window(cand, cand, i, un), count_window(ref, cand, i, un));
    }
    double p;
    if (matched == 0) {
      if (n == 1) return 0.0;
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size()), r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / max_n);
}

inline bool is_subsequence(const Tokens& s, const Tokens& of) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < of.size() && j < s.size(); ++i)
    if (of[i] == s[j]) ++j;
  return j == s.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t oracle_lcs(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  const std::uint32_t limit = 1u << a.size();
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    Tokens s;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) s.push_back(a[i]);
    if (s.size() > best && is_subsequence(s, b)) best = s.size();
  }
  return best;
}

inline double oracle_rouge_l(const Tokens& c, const Tokens& r) {
  if (c.empty() || r.empty()) return 0.0;
  const double l = static_cast<double>(oracle_lcs(c, r));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(c.size()), rc = l / static_cast<double>(r.size());
  return 2 * p * rc / (p + rc);
}

// Token-overlap F1 with multiplicity on the side being measured, which is
// what greedy matching gives under one-hot token vectors.
inline double overlap_f1(const Tokens& c, const Tokens& r) {
  const std::set<std::string> cs(c.begin(), c.end()), rs(r.begin(), r.end());
  double hit_c = 0, hit_r = 0;
  for (const auto& t : c) hit_c += rs.count(t);
  for (const auto& t : r) hit_r += cs.count(t);
  const double p = hit_c / static_cast<double>(c.size());
  const double rc = hit_r / static_cast<double>(r.size());
  return p + rc == 0 ? 0.0 : 2 * p * rc / (p + rc);
}

using Table = std::vector<std::vector<std::optional<int>>>;  // annotator x item

inline double delta2(int a, int b, bool ordinal, const std::map<int, double>& n_c) {
  if (a == b) return 0.0;
  if (!ordinal) return 1.0;
  // Rank distance over the value marginals: sum of n_g for g between a and b
  // minus half the endpoints, squared.
  const int lo = std::min(a, b), hi = std::max(a, b);
  double s = 0;
  for (const auto& [g, n] : n_c)
    if (g >= lo && g <= hi) s += n;
  s -= (n_c.at(lo) + n_c.at(hi)) / 2.0;
  return s * s;
}

// Alpha by enumerating every ordered pair of pairable values, once within
// units for D_o and once across the pooled values for D_e.
inline std::optional<double> oracle_alpha(const Table& t, bool ordinal = false) {
  std::vector<std::vector<int>> units;
  const std::size_t items = t.empty() ? 0 : t[0].size();
  for (std::size_t i = 0; i < items; ++i) {
    std::vector<int> vals;
    for (const auto& row : t)
      if (row[i]) vals.push_back(*row[i]);
    if (vals.size() >= 2) units.push_back(vals);
  }
  std::vector<int> pooled;
  for (const auto& u : units) pooled.insert(pooled.end(), u.begin(), u.end());
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 2) return std::nullopt;
  std::map<int, double> n_c;
  for (int v : pooled) n_c[v] += 1;
  double d_o = 0;
  for (const auto& u : units) {
    double s = 0;
    for (std::size_t a = 0; a < u.size(); ++a)
      for (std::size_t b = 0; b < u.size(); ++b)
        if (a != b) s += delta2(u[a], u[b], ordinal, n_c);
    d_o += s / static_cast<double>(u.size() - 1);
  }
  d_o /= n;
  double d_e = 0;
  for (std::size_t a = 0; a < pooled.size(); ++a)
    for (std::size_t b = 0; b < pooled.size(); ++b)
      if (a != b) d_e += delta2(pooled[a], pooled[b], ordinal, n_c);
  d_e /= n * (n - 1);
  if (d_e == 0) return std::nullopt;
  return 1.0 - d_o / d_e;
}

// Short random strings over a small CJK alphabet so n-grams repeat often.
inline std::string random_cjk(DeterministicRng& rng, std::size_t max_len, std::size_t min_len = 1) {
  static const std::vector<std::string> alphabet{"网", "红", "打", "卡", "躺", "平", "内", "卷"};
  const std::size_t len = min_len + rng.uniform_index(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.uniform_index(alphabet.size())];
  return s;
}

// Synthetic words named w000, w001, ... each with `n_examples` sentences
// that contain the word.
inline std::vector<corpus::BuzzwordEntry> synthetic_corpus(std::size_t n_words,
                                                          std::size_t n_examples = 12) {
  static const std::vector<std::string> fillers{
      "今天大家都在讨论", "我觉得这个说法很有意思", "朋友圈里到处都是", "昨天看到一个视频说",
      "老板开会的时候提到", "网友纷纷表示", "这种情况真的太常见了", "周末和同学聊天时说起"};
  std::vector<corpus::BuzzwordEntry> out;
  for (std::size_t w = 0; w < n_words; ++w) {
    char name[16];
    std::snprintf(name, sizeof name, "w%03zu", w);
    corpus::BuzzwordEntry e;
    e.word = name;
    e.description = std::string("关于") + name + "的说明";
    e.definition = std::string("指一种网络流行说法") + name;
    for (std::size_t i = 0; i < n_examples; ++i)
      e.examples.push_back(fillers[(w + i) % fillers.size()] + "，" + e.word + "第" +
                           std::to_string(i) + "次出现了。");
    out.push_back(std::move(e));
  }
  return out;
}

struct Separable {
  Eigen::MatrixXd X;  // dim x n, one example per column
  Eigen::VectorXd y;
};

// Two Gaussian blobs on either side of a random hyperplane, balanced labels.
inline Separable separable_fixture(std::size_t n, std::size_t dim, std::uint64_t seed,
                                   double margin = 1.0, double noise = 0.3) {
  DeterministicRng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::mt19937_64 eng(seed ^ 0xA5A5A5A5ULL);
  Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gauss(eng);
  u.normalize();
  Separable s;
  s.X.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  s.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double label = (j % 2 == 0) ? 1.0 : 0.0;
    const double sign = label > 0.5 ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      s.X(i, static_cast<Eigen::Index>(j)) = sign * margin * u[i] + noise * gauss(eng) / std::sqrt(double(dim));
    s.y[static_cast<Eigen::Index>(j)] = label;
  }
  // Shuffle columns so a contiguous split stays balanced but not ordered.
  const auto perm = rng.permutation(n);
  Separable out;
  out.X.resize(s.X.rows(), s.X.cols());
  out.y.resize(s.y.size());
  for (std::size_t j = 0; j < n; ++j) {
    out.X.col(static_cast<Eigen::Index>(j)) = s.X.col(static_cast<Eigen::Index>(perm[j]));
    out.y[static_cast<Eigen::Index>(j)] = s.y[static_cast<Eigen::Index>(perm[j])];
  }
  return out;
}

}  // namespace buzzdef::testing
