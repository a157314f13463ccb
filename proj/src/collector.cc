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

#include "dpbudget/collector.h"

#include <algorithm>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace dpbudget {
namespace {

using json = nlohmann::json;

absl::Status CheckCoin(const BiasedCoin& coin) {
  if (coin.p() >= 0.5) {
    return absl::InvalidArgumentError(
        "DegenerateCoin: p = 0.5 carries no signal");
  }
  return absl::OkStatus();
}

double Median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

struct PendingObh {
  uint32_t m;
  double epsilon;
  std::vector<ObhPayload> payloads;
};

struct PendingCms {
  uint32_t k;
  uint32_t m;
  double epsilon;
  std::vector<CmsPayload> payloads;
};

}  // namespace

AggregateObh AggregateObhPayloads(std::string key_name, uint32_t m,
                                  double epsilon,
                                  std::span<const ObhPayload> payloads) {
  AggregateObh aggregate;
  aggregate.key_name = std::move(key_name);
  aggregate.m = m;
  aggregate.epsilon = epsilon;
  aggregate.n = static_cast<int64_t>(payloads.size());
  aggregate.counts = AccumulateObh(payloads, m);
  return aggregate;
}

AggregateCms AggregateCmsPayloads(std::string key_name, uint32_t k, uint32_t m,
                                  double epsilon,
                                  std::span<const CmsPayload> payloads) {
  AggregateCms aggregate;
  aggregate.key_name = std::move(key_name);
  aggregate.k = k;
  aggregate.m = m;
  aggregate.epsilon = epsilon;
  aggregate.n = static_cast<int64_t>(payloads.size());
  aggregate.counts = AccumulateCms(payloads, k, m);
  return aggregate;
}

Aggregates Ingest(std::span<const ReportFile> files) {
  Aggregates out;
  std::map<std::string, PendingObh> obh;
  std::map<std::string, PendingCms> cms;

  for (const ReportFile& file : files) {
    out.malformed_entries += file.rejected_entries;
    for (const ReportEntry& entry : file.entries) {
      absl::StatusOr<std::vector<uint8_t>> bits = DecodeEntryBits(entry);
      if (!bits.ok() || entry.m < 2) {
        ++out.malformed_entries;
        continue;
      }
      if (entry.algorithm == Algorithm::kOneBitHistogram) {
        if (entry.row.has_value()) {
          ++out.malformed_entries;
          continue;
        }
        auto [it, inserted] =
            obh.try_emplace(entry.key_name, PendingObh{entry.m, entry.epsilon, {}});
        if (it->second.m != entry.m || it->second.epsilon != entry.epsilon) {
          ++out.malformed_entries;
          continue;
        }
        it->second.payloads.push_back(ObhPayload{*std::move(bits)});
      } else {
        if (!entry.row.has_value() || entry.k == 0 || *entry.row >= entry.k) {
          ++out.malformed_entries;
          continue;
        }
        auto [it, inserted] = cms.try_emplace(
            entry.key_name, PendingCms{entry.k, entry.m, entry.epsilon, {}});
        if (it->second.m != entry.m || it->second.k != entry.k ||
            it->second.epsilon != entry.epsilon) {
          ++out.malformed_entries;
          continue;
        }
        it->second.payloads.push_back(CmsPayload{*entry.row, *std::move(bits)});
      }
    }
  }

  for (auto& [key, pending] : obh) {
    out.obh.emplace(key, AggregateObhPayloads(key, pending.m, pending.epsilon,
                                              pending.payloads));
  }
  for (auto& [key, pending] : cms) {
    out.cms.emplace(key, AggregateCmsPayloads(key, pending.k, pending.m,
                                              pending.epsilon, pending.payloads));
  }
  return out;
}

absl::StatusOr<std::vector<double>> EstimateObh(const AggregateObh& aggregate,
                                                const BiasedCoin& coin) {
  if (absl::Status status = CheckCoin(coin); !status.ok()) return status;
  const double p = coin.p();
  std::vector<double> estimate(aggregate.counts.size());
  for (size_t i = 0; i < estimate.size(); ++i) {
    estimate[i] = (static_cast<double>(aggregate.counts[i]) -
                   static_cast<double>(aggregate.n) * p) /
                  (1.0 - 2.0 * p);
  }
  return estimate;
}

absl::StatusOr<std::vector<double>> EstimateObh(const AggregateObh& aggregate,
                                                double epsilon) {
  absl::StatusOr<BiasedCoin> coin = BiasedCoin::FromEpsilon(epsilon);
  if (!coin.ok()) return coin.status();
  return EstimateObh(aggregate, *coin);
}

absl::StatusOr<std::map<std::string, double>> EstimateCms(
    const AggregateCms& aggregate, std::span<const std::string> candidates,
    const BiasedCoin& coin) {
  if (absl::Status status = CheckCoin(coin); !status.ok()) return status;
  const CmsCounts& counts = aggregate.counts;
  if (counts.k == 0 || counts.m == 0) {
    return absl::InvalidArgumentError("empty sketch");
  }
  const double p = coin.p();
  std::map<std::string, double> estimates;
  std::vector<double> per_row(counts.k);
  for (const std::string& candidate : candidates) {
    for (uint32_t row = 0; row < counts.k; ++row) {
      const uint32_t column = HashDatum(candidate, row, counts.m);
      per_row[row] = static_cast<double>(counts.k) *
                     (static_cast<double>(counts.at(row, column)) -
                      static_cast<double>(counts.rows_seen[row]) * p) /
                     (1.0 - 2.0 * p);
    }
    estimates[candidate] = Median(per_row);
  }
  return estimates;
}

absl::StatusOr<std::map<std::string, double>> EstimateCms(
    const AggregateCms& aggregate, std::span<const std::string> candidates,
    double epsilon) {
  absl::StatusOr<BiasedCoin> coin = BiasedCoin::FromEpsilon(epsilon);
  if (!coin.ok()) return coin.status();
  return EstimateCms(aggregate, candidates, *coin);
}

json EstimatesToJson(const Aggregates& aggregates,
                     std::span<const std::string> candidates) {
  json histograms = json::object();
  for (const auto& [key, aggregate] : aggregates.obh) {
    json item = {{"n", aggregate.n}, {"m", aggregate.m},
                 {"epsilon", aggregate.epsilon}, {"counts", aggregate.counts}};
    absl::StatusOr<std::vector<double>> estimate =
        EstimateObh(aggregate, aggregate.epsilon);
    if (estimate.ok()) {
      item["estimate"] = *estimate;
    } else {
      item["error"] = std::string(estimate.status().message());
    }
    histograms[key] = std::move(item);
  }
  json sketches = json::object();
  for (const auto& [key, aggregate] : aggregates.cms) {
    json item = {{"n", aggregate.n}, {"k", aggregate.k}, {"m", aggregate.m},
                 {"epsilon", aggregate.epsilon},
                 {"rows_seen", aggregate.counts.rows_seen}};
    absl::StatusOr<std::map<std::string, double>> estimate =
        EstimateCms(aggregate, candidates, aggregate.epsilon);
    if (estimate.ok()) {
      item["estimate"] = *estimate;
    } else {
      item["error"] = std::string(estimate.status().message());
    }
    sketches[key] = std::move(item);
  }
  return {{"histograms", histograms},
          {"sketches", sketches},
          {"malformed_entries", aggregates.malformed_entries}};
}

}  // namespace dpbudget
