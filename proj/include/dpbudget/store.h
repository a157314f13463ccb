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

#ifndef DPBUDGET_STORE_H_
#define DPBUDGET_STORE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpbudget/config.h"
#include "dpbudget/privatizer.h"
#include "json.hpp"

namespace dpbudget {

inline constexpr int64_t kSecondsIn14Day = 14 * kSecondsInOneDay;
inline constexpr char kCurrentRecordVersion[] = "1.0";
inline constexpr size_t kDefaultMaxRecords = 10000;

struct PrivatizedRecord {
  uint64_t record_id = 0;
  std::string key_name;
  Algorithm algorithm = Algorithm::kOneBitHistogram;
  Payload payload;
  double epsilon = 0.0;
  UnixSeconds creation_date = 0;
  bool submitted = false;
  int submission_priority = kDefaultPriority;
  std::string version;

  bool operator==(const PrivatizedRecord&) const = default;
};

struct BudgetRecord {
  std::string budget_key_name;
  int64_t balance = 0;
  UnixSeconds last_update = 0;
  UnixSeconds creation_date = 0;

  bool operator==(const BudgetRecord&) const = default;
};

struct BudgetIncrement {
  std::string budget_key_name;
  int64_t increment = 0;
  bool operator==(const BudgetIncrement&) const = default;
};

// Histogram keys take a bucket; a string datum is hashed into one. Sketch
// keys take a string.
struct Bucket {
  uint32_t index = 0;
};
using EventDatum = std::variant<std::string, Bucket>;

struct StoreOptions {
  std::string current_version = kCurrentRecordVersion;
  size_t max_records = kDefaultMaxRecords;
};

// On-device state: privatized records, the set of already-seen words, and
// one budget ledger row per BudgetKeyName.
//
// The seen-word set keeps raw strings on the device. This mirrors the
// observed implementation, where it lets anyone with database access test
// whether a word was ever typed; it is reproduced, not endorsed.
class Store {
 public:
  // Creates every budget row with balance = SessionAmount.
  static Store OptIn(const ConfigBundle& bundle, UnixSeconds now,
                     StoreOptions options = {});

  // Privatizes and stores one event. Sketch keys store a record only for a
  // (key_name, word) pair not seen before; returns nullopt otherwise.
  absl::StatusOr<std::optional<PrivatizedRecord>> SubmitEvent(
      const ConfigBundle& bundle, absl::string_view key_name,
      const EventDatum& datum, UnixSeconds now, RandomSource& rng);

  // balance += SessionAmount * floor((now - last_update) / SessionSeconds),
  // with last_update advanced by the whole sessions consumed.
  absl::StatusOr<std::vector<BudgetIncrement>> UpdateAllBudgets(
      const ConfigBundle& bundle, UnixSeconds now);

  // Removes submitted records and records with a stale version.
  int StorageCulling(UnixSeconds now);

  // Removes records older than 14 days, then the oldest records beyond
  // max_records.
  int StorageMaintenance(UnixSeconds now);

  // balance := floor((last_update - creation_date) / 86400) for every row.
  std::vector<BudgetRecord> AnomalousBudgetReset(UnixSeconds now);

  absl::Status MarkSubmitted(uint64_t record_id);
  absl::Status Spend(absl::string_view budget_key_name, int64_t amount);

  const std::vector<PrivatizedRecord>& records() const { return records_; }
  const std::map<std::string, BudgetRecord>& budgets() const { return budgets_; }
  const BudgetRecord* FindBudget(absl::string_view budget_key_name) const;
  const PrivatizedRecord* FindRecord(uint64_t record_id) const;
  const std::set<std::pair<std::string, std::string>>& seen_words() const {
    return seen_;
  }
  const std::string& current_version() const { return current_version_; }
  size_t max_records() const { return max_records_; }
  uint64_t next_record_id() const { return next_record_id_; }

  // Test and migration hook: inserts a record verbatim (including version).
  uint64_t InsertRecordForTesting(PrivatizedRecord record);

  nlohmann::json ToJson() const;
  static absl::StatusOr<Store> FromJson(const nlohmann::json& doc);

  bool operator==(const Store&) const = default;

 private:
  std::vector<PrivatizedRecord> records_;  // ascending record_id
  std::map<std::string, BudgetRecord> budgets_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::string current_version_;
  size_t max_records_ = kDefaultMaxRecords;
  uint64_t next_record_id_ = 1;
};

// Bit packing shared by the snapshot and report formats: bit i lives in byte
// i / 8 at position i % 8, then the bytes are base64 encoded.
std::string EncodeBits(const std::vector<uint8_t>& bits);
// Fails if the text is not base64, has the wrong length for m, or sets
// padding bits past m.
absl::StatusOr<std::vector<uint8_t>> DecodeBits(absl::string_view encoded,
                                                uint32_t m);

}  // namespace dpbudget

#endif  // DPBUDGET_STORE_H_
