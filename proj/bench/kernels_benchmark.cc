// Copyright 2026 The dpbudget Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference versus OpenMP kernels.

#include <cstdint>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "benchmark/benchmark.h"
#include "dpbudget/kernels.h"
#include "dpbudget/privatizer.h"

namespace dpbudget {
namespace {

constexpr uint32_t kHistogramBuckets = 1024;
constexpr uint32_t kSketchRows = 16;
constexpr uint32_t kSketchColumns = 1024;

BiasedCoin Coin() { return *BiasedCoin::FromEpsilon(1.0); }

std::vector<uint32_t> Buckets(int64_t n) {
  RandomSource rng(7);
  std::vector<uint32_t> buckets(n);
  for (uint32_t& b : buckets) b = static_cast<uint32_t>(rng.UniformInt(kHistogramBuckets));
  return buckets;
}

std::vector<std::string> Words(int64_t n) {
  std::vector<std::string> words(n);
  for (int64_t i = 0; i < n; ++i) words[i] = absl::StrCat("word", i % 997);
  return words;
}

template <auto Kernel>
void BM_PrivatizeObh(benchmark::State& state) {
  const std::vector<uint32_t> buckets = Buckets(state.range(0));
  const RandomSource base(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(buckets, kHistogramBuckets, Coin(), base));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_PrivatizeCms(benchmark::State& state) {
  const std::vector<std::string> words = Words(state.range(0));
  const RandomSource base(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        Kernel(words, Coin(), kSketchRows, kSketchColumns, base));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_AccumulateObh(benchmark::State& state) {
  const std::vector<ObhPayload> payloads = PrivatizeObhBatch(
      Buckets(state.range(0)), kHistogramBuckets, Coin(), RandomSource(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(payloads, kHistogramBuckets));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Kernel>
void BM_AccumulateCms(benchmark::State& state) {
  const std::vector<CmsPayload> payloads =
      PrivatizeCmsBatch(Words(state.range(0)), Coin(), kSketchRows,
                        kSketchColumns, RandomSource(3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(payloads, kSketchRows, kSketchColumns));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_PrivatizeObh<PrivatizeObhBatchSerial>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_PrivatizeObh<PrivatizeObhBatch>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_PrivatizeCms<PrivatizeCmsBatchSerial>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_PrivatizeCms<PrivatizeCmsBatch>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_AccumulateObh<AccumulateObhSerial>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_AccumulateObh<AccumulateObh>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_AccumulateCms<AccumulateCmsSerial>)->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_AccumulateCms<AccumulateCms>)->Arg(1 << 12)->Arg(1 << 15);

}  // namespace
}  // namespace dpbudget

BENCHMARK_MAIN();
