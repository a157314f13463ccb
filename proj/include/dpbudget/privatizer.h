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

// Per-datum local randomizers. Both algorithms build a one-hot vector and
// pass every bit through the same biased coin, p = 1 / (exp(epsilon) + 1).
//
// OneBitHistogram: one-hot of the bucket index over m buckets.
// CountMedianSketch: a row j is drawn uniformly from [0, k) and the one-hot
// of HashDatum(datum, j, m) is randomized. The collector inverts both.

#ifndef DPBUDGET_PRIVATIZER_H_
#define DPBUDGET_PRIVATIZER_H_

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace dpbudget {

// Deterministic random stream. Sampling transforms are implemented here
// rather than with <random> distributions so that output is identical across
// standard libraries.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of precision.
  double NextDouble() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool Bernoulli(double p) { return NextDouble() < p; }
  // Uniform on [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n);

  // An independent stream identified by (stream, index). Does not advance
  // this source.
  RandomSource Fork(uint64_t stream, uint64_t index = 0) const;

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

uint64_t MixBits(uint64_t x);

class BiasedCoin {
 public:
  static absl::StatusOr<BiasedCoin> FromEpsilon(double epsilon);
  // Test hook; p must lie in [0, 0.5].
  static absl::StatusOr<BiasedCoin> WithProbability(double p);

  double p() const { return p_; }
  bool Flip(RandomSource& rng) const { return rng.Bernoulli(p_); }

 private:
  explicit BiasedCoin(double p) : p_(p) {}
  double p_;
};

// 1 / (exp(epsilon) + 1). NegativeEpsilon for epsilon < 0.
absl::StatusOr<double> CoinProbability(double epsilon);

struct ObhPayload {
  std::vector<uint8_t> bits;  // one byte per bit, values 0/1
  bool operator==(const ObhPayload&) const = default;
};

struct CmsPayload {
  uint32_t row = 0;
  std::vector<uint8_t> bits;
  bool operator==(const CmsPayload&) const = default;
};

using Payload = std::variant<ObhPayload, CmsPayload>;

const std::vector<uint8_t>& PayloadBits(const Payload& payload);

// FNV-1a 64 over the row index (8 bytes, little-endian) followed by the datum
// bytes, then the splitmix64 finalizer, reduced mod m. Frozen: changing it
// breaks every stored sketch.
uint32_t HashDatum(absl::string_view datum, uint32_t row, uint32_t m);

absl::StatusOr<ObhPayload> PrivatizeObh(uint32_t bucket, uint32_t m,
                                        double epsilon, RandomSource& rng);
absl::StatusOr<ObhPayload> PrivatizeObh(uint32_t bucket, uint32_t m,
                                        const BiasedCoin& coin,
                                        RandomSource& rng);

absl::StatusOr<CmsPayload> PrivatizeCms(absl::string_view datum, double epsilon,
                                        uint32_t k, uint32_t m,
                                        RandomSource& rng);
absl::StatusOr<CmsPayload> PrivatizeCms(absl::string_view datum,
                                        const BiasedCoin& coin, uint32_t k,
                                        uint32_t m, RandomSource& rng);

// Randomized response over a one-hot vector; shared by both algorithms and
// by the batch kernels.
void RandomizeOneHot(uint32_t hot_index, const BiasedCoin& coin,
                     RandomSource& rng, std::vector<uint8_t>& bits);

}  // namespace dpbudget

#endif  // DPBUDGET_PRIVATIZER_H_
