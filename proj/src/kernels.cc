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

#include "dpbudget/kernels.h"

#include <omp.h>

#include <cstddef>

namespace dpbudget {
namespace {

ObhPayload PrivatizeOneObh(uint32_t bucket, uint32_t m, const BiasedCoin& coin,
                           const RandomSource& base, size_t index) {
  RandomSource rng = base.Fork(kBatchStream, index);
  ObhPayload payload;
  payload.bits.resize(m);
  RandomizeOneHot(bucket, coin, rng, payload.bits);
  return payload;
}

CmsPayload PrivatizeOneCms(const std::string& datum, const BiasedCoin& coin,
                           uint32_t k, uint32_t m, const RandomSource& base,
                           size_t index) {
  RandomSource rng = base.Fork(kBatchStream, index);
  CmsPayload payload;
  payload.row = static_cast<uint32_t>(rng.UniformInt(k));
  payload.bits.resize(m);
  RandomizeOneHot(HashDatum(datum, payload.row, m), coin, rng, payload.bits);
  return payload;
}

int64_t FlipsIn(const ObhPayload& payload, uint32_t hot) {
  int64_t flips = 0;
  for (size_t i = 0; i < payload.bits.size(); ++i) {
    flips += payload.bits[i] != (i == hot ? 1 : 0);
  }
  return flips;
}

}  // namespace

std::vector<ObhPayload> PrivatizeObhBatch(std::span<const uint32_t> buckets,
                                          uint32_t m, const BiasedCoin& coin,
                                          const RandomSource& base) {
  std::vector<ObhPayload> out(buckets.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(buckets.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = PrivatizeOneObh(buckets[i], m, coin, base, static_cast<size_t>(i));
  }
  return out;
}

std::vector<ObhPayload> PrivatizeObhBatchSerial(
    std::span<const uint32_t> buckets, uint32_t m, const BiasedCoin& coin,
    const RandomSource& base) {
  std::vector<ObhPayload> out;
  out.reserve(buckets.size());
  for (size_t i = 0; i < buckets.size(); ++i) {
    out.push_back(PrivatizeOneObh(buckets[i], m, coin, base, i));
  }
  return out;
}

std::vector<CmsPayload> PrivatizeCmsBatch(std::span<const std::string> data,
                                          const BiasedCoin& coin, uint32_t k,
                                          uint32_t m, const RandomSource& base) {
  std::vector<CmsPayload> out(data.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = PrivatizeOneCms(data[i], coin, k, m, base, static_cast<size_t>(i));
  }
  return out;
}

std::vector<CmsPayload> PrivatizeCmsBatchSerial(
    std::span<const std::string> data, const BiasedCoin& coin, uint32_t k,
    uint32_t m, const RandomSource& base) {
  std::vector<CmsPayload> out;
  out.reserve(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    out.push_back(PrivatizeOneCms(data[i], coin, k, m, base, i));
  }
  return out;
}

std::vector<int64_t> AccumulateObh(std::span<const ObhPayload> payloads,
                                   uint32_t m) {
  std::vector<int64_t> counts(m, 0);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(payloads.size());
#pragma omp parallel
  {
    std::vector<int64_t> local(m, 0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& bits = payloads[i].bits;
      if (bits.size() != m) continue;
      for (uint32_t j = 0; j < m; ++j) local[j] += bits[j];
    }
#pragma omp critical(dpbudget_accumulate_obh)
    for (uint32_t j = 0; j < m; ++j) counts[j] += local[j];
  }
  return counts;
}

std::vector<int64_t> AccumulateObhSerial(std::span<const ObhPayload> payloads,
                                         uint32_t m) {
  std::vector<int64_t> counts(m, 0);
  for (const ObhPayload& payload : payloads) {
    if (payload.bits.size() != m) continue;
    for (uint32_t j = 0; j < m; ++j) counts[j] += payload.bits[j];
  }
  return counts;
}

CmsCounts AccumulateCms(std::span<const CmsPayload> payloads, uint32_t k,
                        uint32_t m) {
  CmsCounts counts{k, m, std::vector<int64_t>(static_cast<size_t>(k) * m, 0),
                   std::vector<int64_t>(k, 0)};
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(payloads.size());
#pragma omp parallel
  {
    std::vector<int64_t> local(counts.matrix.size(), 0);
    std::vector<int64_t> local_rows(k, 0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const CmsPayload& payload = payloads[i];
      if (payload.row >= k || payload.bits.size() != m) continue;
      ++local_rows[payload.row];
      int64_t* row = local.data() + static_cast<size_t>(payload.row) * m;
      for (uint32_t j = 0; j < m; ++j) row[j] += payload.bits[j];
    }
#pragma omp critical(dpbudget_accumulate_cms)
    {
      for (size_t j = 0; j < local.size(); ++j) counts.matrix[j] += local[j];
      for (uint32_t r = 0; r < k; ++r) counts.rows_seen[r] += local_rows[r];
    }
  }
  return counts;
}

CmsCounts AccumulateCmsSerial(std::span<const CmsPayload> payloads, uint32_t k,
                              uint32_t m) {
  CmsCounts counts{k, m, std::vector<int64_t>(static_cast<size_t>(k) * m, 0),
                   std::vector<int64_t>(k, 0)};
  for (const CmsPayload& payload : payloads) {
    if (payload.row >= k || payload.bits.size() != m) continue;
    ++counts.rows_seen[payload.row];
    for (uint32_t j = 0; j < m; ++j) {
      counts.matrix[static_cast<size_t>(payload.row) * m + j] += payload.bits[j];
    }
  }
  return counts;
}

int64_t CountFlips(std::span<const ObhPayload> payloads,
                   std::span<const uint32_t> hot_indices) {
  int64_t flips = 0;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(payloads.size());
#pragma omp parallel for reduction(+ : flips) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    flips += FlipsIn(payloads[i], hot_indices[i]);
  }
  return flips;
}

int64_t CountFlipsSerial(std::span<const ObhPayload> payloads,
                         std::span<const uint32_t> hot_indices) {
  int64_t flips = 0;
  for (size_t i = 0; i < payloads.size(); ++i) {
    flips += FlipsIn(payloads[i], hot_indices[i]);
  }
  return flips;
}

}  // namespace dpbudget
