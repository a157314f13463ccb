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

#include "dpbudget/privatizer.h"

#include <cmath>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace dpbudget {
namespace {

constexpr uint64_t kFnvOffsetBasis = 0xCBF29CE484222325ULL;
constexpr uint64_t kFnvPrime = 0x100000001B3ULL;

uint64_t Fnv1a(const unsigned char* data, size_t size, uint64_t hash) {
  for (size_t i = 0; i < size; ++i) {
    hash ^= data[i];
    hash *= kFnvPrime;
  }
  return hash;
}

}  // namespace

uint64_t MixBits(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

uint64_t RandomSource::UniformInt(uint64_t n) {
  // Rejection sampling keeps the result exactly uniform.
  const uint64_t limit =
      std::numeric_limits<uint64_t>::max() -
      std::numeric_limits<uint64_t>::max() % n;
  uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % n;
}

RandomSource RandomSource::Fork(uint64_t stream, uint64_t index) const {
  uint64_t derived = MixBits(seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1));
  derived = MixBits(derived ^ MixBits(index + 0xD1B54A32D192ED03ULL));
  return RandomSource(derived);
}

absl::StatusOr<double> CoinProbability(double epsilon) {
  if (std::isnan(epsilon) || epsilon < 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("NegativeEpsilon: ", epsilon));
  }
  return 1.0 / (std::exp(epsilon) + 1.0);
}

absl::StatusOr<BiasedCoin> BiasedCoin::FromEpsilon(double epsilon) {
  absl::StatusOr<double> p = CoinProbability(epsilon);
  if (!p.ok()) return p.status();
  return BiasedCoin(*p);
}

absl::StatusOr<BiasedCoin> BiasedCoin::WithProbability(double p) {
  if (!(p >= 0.0 && p <= 0.5)) {
    return absl::InvalidArgumentError(
        absl::StrCat("coin probability must lie in [0, 0.5], got ", p));
  }
  return BiasedCoin(p);
}

const std::vector<uint8_t>& PayloadBits(const Payload& payload) {
  return std::visit([](const auto& p) -> const std::vector<uint8_t>& {
    return p.bits;
  }, payload);
}

uint32_t HashDatum(absl::string_view datum, uint32_t row, uint32_t m) {
  unsigned char row_bytes[8];
  uint64_t row64 = row;
  for (int i = 0; i < 8; ++i) {
    row_bytes[i] = static_cast<unsigned char>(row64 >> (8 * i));
  }
  uint64_t hash = Fnv1a(row_bytes, sizeof(row_bytes), kFnvOffsetBasis);
  hash = Fnv1a(reinterpret_cast<const unsigned char*>(datum.data()),
               datum.size(), hash);
  return static_cast<uint32_t>(MixBits(hash) % m);
}

void RandomizeOneHot(uint32_t hot_index, const BiasedCoin& coin,
                     RandomSource& rng, std::vector<uint8_t>& bits) {
  for (size_t i = 0; i < bits.size(); ++i) {
    const uint8_t clean = i == hot_index ? 1 : 0;
    bits[i] = clean ^ static_cast<uint8_t>(coin.Flip(rng));
  }
}

absl::StatusOr<ObhPayload> PrivatizeObh(uint32_t bucket, uint32_t m,
                                        const BiasedCoin& coin,
                                        RandomSource& rng) {
  if (bucket >= m) {
    return absl::OutOfRangeError(
        absl::StrCat("BucketOutOfRange: bucket ", bucket, " not in [0, ", m, ")"));
  }
  ObhPayload payload;
  payload.bits.resize(m);
  RandomizeOneHot(bucket, coin, rng, payload.bits);
  return payload;
}

absl::StatusOr<ObhPayload> PrivatizeObh(uint32_t bucket, uint32_t m,
                                        double epsilon, RandomSource& rng) {
  absl::StatusOr<BiasedCoin> coin = BiasedCoin::FromEpsilon(epsilon);
  if (!coin.ok()) return coin.status();
  return PrivatizeObh(bucket, m, *coin, rng);
}

absl::StatusOr<CmsPayload> PrivatizeCms(absl::string_view datum,
                                        const BiasedCoin& coin, uint32_t k,
                                        uint32_t m, RandomSource& rng) {
  if (datum.empty()) return absl::InvalidArgumentError("EmptyDatum");
  if (k == 0 || m < 2) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid sketch shape k=", k, " m=", m));
  }
  CmsPayload payload;
  payload.row = static_cast<uint32_t>(rng.UniformInt(k));
  payload.bits.resize(m);
  RandomizeOneHot(HashDatum(datum, payload.row, m), coin, rng, payload.bits);
  return payload;
}

absl::StatusOr<CmsPayload> PrivatizeCms(absl::string_view datum, double epsilon,
                                        uint32_t k, uint32_t m,
                                        RandomSource& rng) {
  absl::StatusOr<BiasedCoin> coin = BiasedCoin::FromEpsilon(epsilon);
  if (!coin.ok()) return coin.status();
  return PrivatizeCms(datum, *coin, k, m, rng);
}

}  // namespace dpbudget
