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

// Batch privatization and aggregation kernels. Every kernel has an OpenMP
// version and a *Serial reference; tests require them to agree exactly.
// Item i of a batch always draws from base.Fork(kBatchStream, i), so results
// do not depend on the thread count.

#ifndef DPBUDGET_KERNELS_H_
#define DPBUDGET_KERNELS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpbudget/privatizer.h"

namespace dpbudget {

inline constexpr uint64_t kBatchStream = 0xBA7C;

std::vector<ObhPayload> PrivatizeObhBatch(std::span<const uint32_t> buckets,
                                          uint32_t m, const BiasedCoin& coin,
                                          const RandomSource& base);
std::vector<ObhPayload> PrivatizeObhBatchSerial(
    std::span<const uint32_t> buckets, uint32_t m, const BiasedCoin& coin,
    const RandomSource& base);

std::vector<CmsPayload> PrivatizeCmsBatch(std::span<const std::string> data,
                                          const BiasedCoin& coin, uint32_t k,
                                          uint32_t m, const RandomSource& base);
std::vector<CmsPayload> PrivatizeCmsBatchSerial(
    std::span<const std::string> data, const BiasedCoin& coin, uint32_t k,
    uint32_t m, const RandomSource& base);

// Column sums of m-bit payloads. Payloads whose length differs from m are
// the caller's bug and are skipped.
std::vector<int64_t> AccumulateObh(std::span<const ObhPayload> payloads,
                                   uint32_t m);
std::vector<int64_t> AccumulateObhSerial(std::span<const ObhPayload> payloads,
                                         uint32_t m);

struct CmsCounts {
  uint32_t k = 0;
  uint32_t m = 0;
  std::vector<int64_t> matrix;  // row-major k x m
  std::vector<int64_t> rows_seen;

  int64_t at(uint32_t row, uint32_t column) const {
    return matrix[static_cast<size_t>(row) * m + column];
  }
  bool operator==(const CmsCounts&) const = default;
};

CmsCounts AccumulateCms(std::span<const CmsPayload> payloads, uint32_t k,
                        uint32_t m);
CmsCounts AccumulateCmsSerial(std::span<const CmsPayload> payloads, uint32_t k,
                              uint32_t m);

// Number of positions where a payload differs from the one-hot of its hot
// index, summed over the batch.
int64_t CountFlips(std::span<const ObhPayload> payloads,
                   std::span<const uint32_t> hot_indices);
int64_t CountFlipsSerial(std::span<const ObhPayload> payloads,
                         std::span<const uint32_t> hot_indices);

}  // namespace dpbudget

#endif  // DPBUDGET_KERNELS_H_
