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

// Server-side aggregation of report files and debiased frequency estimates.
//
// Each reported bit is the true bit passed through a coin with flip
// probability p, so E[count_i] = n_i (1 - p) + (n - n_i) p and
//   n_i = (count_i - n p) / (1 - 2p).
// A sketch report lands in one of k rows chosen uniformly, so row j sees
// about 1/k of a word's occurrences. Inverting row j therefore estimates
// n_w / k, and the per-row estimate is scaled by k:
//   est_j(w) = k (M[j][h_j(w)] - rows_seen[j] p) / (1 - 2p).
// The returned estimate is the median of est_j over the k rows.

#ifndef DPBUDGET_COLLECTOR_H_
#define DPBUDGET_COLLECTOR_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dpbudget/kernels.h"
#include "dpbudget/privatizer.h"
#include "dpbudget/report_io.h"
#include "json.hpp"

namespace dpbudget {

struct AggregateObh {
  std::string key_name;
  uint32_t m = 0;
  double epsilon = 0.0;
  int64_t n = 0;
  std::vector<int64_t> counts;
  bool operator==(const AggregateObh&) const = default;
};

struct AggregateCms {
  std::string key_name;
  uint32_t k = 0;
  uint32_t m = 0;
  double epsilon = 0.0;
  int64_t n = 0;
  CmsCounts counts;
  bool operator==(const AggregateCms&) const = default;
};

struct Aggregates {
  std::map<std::string, AggregateObh> obh;
  std::map<std::string, AggregateCms> cms;
  // Entries rejected individually: undecodable payload, wrong length, row
  // out of range, or a shape/epsilon that disagrees with the key's first
  // accepted entry.
  int64_t malformed_entries = 0;
  bool operator==(const Aggregates&) const = default;
};

Aggregates Ingest(std::span<const ReportFile> files);

absl::StatusOr<std::vector<double>> EstimateObh(const AggregateObh& aggregate,
                                                double epsilon);
absl::StatusOr<std::vector<double>> EstimateObh(const AggregateObh& aggregate,
                                                const BiasedCoin& coin);

absl::StatusOr<std::map<std::string, double>> EstimateCms(
    const AggregateCms& aggregate, std::span<const std::string> candidates,
    double epsilon);
absl::StatusOr<std::map<std::string, double>> EstimateCms(
    const AggregateCms& aggregate, std::span<const std::string> candidates,
    const BiasedCoin& coin);

// Builds aggregates straight from payloads, bypassing report files.
AggregateObh AggregateObhPayloads(std::string key_name, uint32_t m,
                                  double epsilon,
                                  std::span<const ObhPayload> payloads);
AggregateCms AggregateCmsPayloads(std::string key_name, uint32_t k, uint32_t m,
                                  double epsilon,
                                  std::span<const CmsPayload> payloads);

// Estimates for every aggregate, using each aggregate's recorded epsilon.
nlohmann::json EstimatesToJson(const Aggregates& aggregates,
                               std::span<const std::string> candidates);

}  // namespace dpbudget

#endif  // DPBUDGET_COLLECTOR_H_
