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

// The telemetry daemon on a virtual clock.
//
// Five periodic tasks run at fixed, compiled-in periods measured from
// opt-in. When several fall due at the same instant they fire in enum order,
// so a budget refill always precedes a report on a shared boundary.

#ifndef DPBUDGET_DAEMON_H_
#define DPBUDGET_DAEMON_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpbudget/auditor.h"
#include "dpbudget/config.h"
#include "dpbudget/privatizer.h"
#include "dpbudget/report_io.h"
#include "dpbudget/store.h"
#include "json.hpp"

namespace dpbudget {

inline constexpr int64_t kSecondsIn12Hours = 12 * 3600;
inline constexpr int64_t kSecondsIn18Hours = 18 * 3600;
inline constexpr int64_t kSecondsIn24Hours = 24 * 3600;

enum class Task {
  kBudgetMaintenance = 0,
  kReportGenerator,
  kStorageCulling,
  kStorageMaintenance,
  kReportFilesMaintenance,
};
inline constexpr size_t kTaskCount = 5;
inline constexpr std::array<Task, kTaskCount> kTasksInFiringOrder = {
    Task::kBudgetMaintenance, Task::kReportGenerator, Task::kStorageCulling,
    Task::kStorageMaintenance, Task::kReportFilesMaintenance};

absl::string_view TaskName(Task task);
int64_t TaskInterval(Task task);

class VirtualClock {
 public:
  explicit VirtualClock(UnixSeconds start = 0);

  UnixSeconds now() const { return now_; }
  UnixSeconds next_due(Task task) const {
    return next_due_[static_cast<size_t>(task)];
  }
  UnixSeconds NextDueTime() const;
  // Tasks due exactly at `t`, in firing order.
  std::vector<Task> DueAt(UnixSeconds t) const;
  void Reschedule(Task task);
  // Time only moves forward; earlier values are ignored.
  void AdvanceTo(UnixSeconds t);

  nlohmann::json ToJson() const;
  static absl::StatusOr<VirtualClock> FromJson(const nlohmann::json& doc);

  bool operator==(const VirtualClock&) const = default;

 private:
  UnixSeconds now_;
  std::array<UnixSeconds, kTaskCount> next_due_;
};

struct Selection {
  std::map<std::string, std::vector<uint64_t>> chosen;  // key_name -> ids
  std::map<std::string, int64_t> per_budget_spend;

  size_t size() const;
  std::vector<uint64_t> record_ids() const;  // ascending
};

// Budget-constrained choice of records for one report:
//  * only unsubmitted, current-version records with a resolvable key;
//  * never a record tagged with the never-submit priority;
//  * at most min(SessionAmount, 40) per KeyName;
//  * at most the current balance per BudgetKeyName;
//  * ascending priority, ties in seeded random order.
Selection SelectRecords(const Store& store, const ConfigBundle& bundle,
                        RandomSource& rng);

struct ReportGeneration {
  Selection selection;
  std::vector<ReportFile> files;
};

// Selects, marks submitted, debits balances, appends to the ledger, renders.
absl::StatusOr<ReportGeneration> RunReportGenerator(
    Store& store, const ConfigBundle& bundle, UnixSeconds now,
    RandomSource& rng, LossLedger& ledger, bool shift_7h = false,
    const std::set<std::string>& taken_paths = {});

struct DaemonOptions {
  uint64_t seed = 0;
  bool shift_7h = false;
  bool enable_anomalous_reset = false;
  StoreOptions store;
  std::optional<RetentionPolicy> retention;  // defaults to the bundle's
};

struct TaskFiring {
  UnixSeconds at = 0;
  Task task = Task::kBudgetMaintenance;
  std::string log_line;
};

struct AdvanceResult {
  std::vector<TaskFiring> fired;
  std::vector<ReportFile> emitted;
  std::vector<ReportFile> deleted;
};

// Owns the configuration, store, ledger, clock and retained report files.
// Not thread-safe; movable.
class Daemon {
 public:
  static Daemon OptIn(ConfigBundle bundle, UnixSeconds now,
                      DaemonOptions options = {});

  absl::StatusOr<std::optional<PrivatizedRecord>> SubmitEvent(
      absl::string_view key_name, const EventDatum& datum);

  // Fires every task due in (now, now + duration], each at its due time.
  absl::StatusOr<AdvanceResult> Advance(int64_t duration);

  UnixSeconds now() const { return clock_.now(); }
  UnixSeconds opt_in_time() const { return opt_in_time_; }
  const ConfigBundle& bundle() const { return bundle_; }
  const DaemonOptions& options() const { return options_; }
  const Store& store() const { return store_; }
  const LossLedger& ledger() const { return ledger_; }
  const VirtualClock& clock() const { return clock_; }
  const RetentionPolicy& retention() const { return retention_; }
  // Report files emitted and not yet expired. Files restored from a
  // snapshot carry only path, creation time and folder.
  const std::vector<ReportFile>& reports() const { return reports_; }
  const std::vector<std::string>& log() const { return log_; }
  // Record counts of every report file ever emitted, in emission order.
  const std::vector<size_t>& report_sizes() const { return report_sizes_; }

  // `profile` is recorded so a later process can reload the same bundle.
  nlohmann::json SnapshotJson(const std::string& profile) const;
  static absl::StatusOr<Daemon> FromSnapshot(const nlohmann::json& doc,
                                             ConfigBundle bundle);

 private:
  Daemon(ConfigBundle bundle, Store store, VirtualClock clock,
         DaemonOptions options);

  absl::Status Fire(Task task, AdvanceResult& result);
  void Log(std::string line);

  ConfigBundle bundle_;
  Store store_;
  VirtualClock clock_;
  DaemonOptions options_;
  RetentionPolicy retention_;
  RandomSource base_rng_;
  LossLedger ledger_;
  UnixSeconds opt_in_time_ = 0;
  uint64_t report_runs_ = 0;
  std::vector<ReportFile> reports_;
  std::vector<size_t> report_sizes_;
  std::vector<std::string> log_;
};

inline constexpr char kSnapshotFormat[] = "dpbudget-snapshot/1";

}  // namespace dpbudget

#endif  // DPBUDGET_DAEMON_H_
