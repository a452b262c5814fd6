// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "buzzdef/agreement.hpp"
#include "buzzdef/metrics.hpp"
#include "buzzdef/selectors.hpp"
#include "buzzdef/text.hpp"
#include "buzzdef/waus_head.hpp"

using namespace buzzdef;

namespace {

// Random CJK-range strings from a small alphabet so n-grams repeat.
std::string random_text(std::mt19937_64& rng, std::size_t len) {
  std::uniform_int_distribution<int> pick(0, 39);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += text::encode_utf8(static_cast<char32_t>(0x4E00 + pick(rng)));
  return s;
}

void BM_Bleu(benchmark::State& st) {
  std::mt19937_64 rng(1);
  const auto len = static_cast<std::size_t>(st.range(0));
  const auto cand = metrics::tokenize(random_text(rng, len));
  const std::vector<metrics::TokenSeq> refs{metrics::tokenize(random_text(rng, len))};
  for (auto _ : st) benchmark::DoNotOptimize(metrics::bleu(cand, refs));
}
BENCHMARK(BM_Bleu)->Arg(30)->Arg(120)->Arg(480);

void BM_RougeL(benchmark::State& st) {
  std::mt19937_64 rng(2);
  const auto len = static_cast<std::size_t>(st.range(0));
  const auto a = metrics::tokenize(random_text(rng, len));
  const auto b = metrics::tokenize(random_text(rng, len));
  for (auto _ : st) benchmark::DoNotOptimize(metrics::rouge_l(a, b));
}
BENCHMARK(BM_RougeL)->Arg(30)->Arg(120)->Arg(480);

void BM_Gdex(benchmark::State& st) {
  const auto lex = select::GdexLexicons::load();
  const std::string sentence = "今天我们在会议上讨论了这个内卷的问题，大家都觉得很有意思。";
  for (auto _ : st) benchmark::DoNotOptimize(select::gdex_score(sentence, "内卷", lex));
}
BENCHMARK(BM_Gdex);

void BM_WausLogits(benchmark::State& st) {
  const auto head = waus::WausHead::init(waus::HeadDims{}, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  waus::Matrix X(static_cast<Eigen::Index>(head.dims.input), st.range(0));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  for (auto _ : st) benchmark::DoNotOptimize(head.logits(X));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_WausLogits)->Arg(1)->Arg(128);

void BM_Alpha(benchmark::State& st) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> v(1, 5);
  agree::Ratings r(3, std::vector<std::optional<int>>(static_cast<std::size_t>(st.range(0))));
  for (auto& row : r)
    for (auto& c : row) c = v(rng);
  for (auto _ : st) benchmark::DoNotOptimize(agree::krippendorff_alpha(r, agree::Level::Ordinal));
}
BENCHMARK(BM_Alpha)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
