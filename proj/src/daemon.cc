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

#include "dpbudget/daemon.h"

#include <algorithm>
#include <numeric>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace dpbudget {
namespace {

using json = nlohmann::json;

// Independent random streams derived from the daemon seed.
constexpr uint64_t kPrivatizeStream = 1;
constexpr uint64_t kSelectStream = 2;

}  // namespace

absl::string_view TaskName(Task task) {
  switch (task) {
    case Task::kBudgetMaintenance:
      return "PrivacyBudgetMaintenance";
    case Task::kReportGenerator:
      return "ReportGenerator";
    case Task::kStorageCulling:
      return "StorageCulling";
    case Task::kStorageMaintenance:
      return "StorageMaintenance";
    case Task::kReportFilesMaintenance:
      return "ReportFilesMaintenance";
  }
  return "unknown";
}

int64_t TaskInterval(Task task) {
  switch (task) {
    case Task::kReportGenerator:
      return kSecondsIn18Hours;
    case Task::kStorageMaintenance:
      return kSecondsIn12Hours;
    case Task::kBudgetMaintenance:
    case Task::kStorageCulling:
    case Task::kReportFilesMaintenance:
      return kSecondsIn24Hours;
  }
  return kSecondsIn24Hours;
}

VirtualClock::VirtualClock(UnixSeconds start) : now_(start) {
  for (Task task : kTasksInFiringOrder) {
    next_due_[static_cast<size_t>(task)] = start + TaskInterval(task);
  }
}

UnixSeconds VirtualClock::NextDueTime() const {
  return *std::min_element(next_due_.begin(), next_due_.end());
}

std::vector<Task> VirtualClock::DueAt(UnixSeconds t) const {
  std::vector<Task> due;
  for (Task task : kTasksInFiringOrder) {
    if (next_due(task) == t) due.push_back(task);
  }
  return due;
}

void VirtualClock::Reschedule(Task task) {
  next_due_[static_cast<size_t>(task)] += TaskInterval(task);
}

void VirtualClock::AdvanceTo(UnixSeconds t) { now_ = std::max(now_, t); }

json VirtualClock::ToJson() const {
  json due = json::object();
  for (Task task : kTasksInFiringOrder) {
    due[std::string(TaskName(task))] = next_due(task);
  }
  return {{"now", now_}, {"next_due", due}};
}

absl::StatusOr<VirtualClock> VirtualClock::FromJson(const json& doc) {
  VirtualClock clock;
  try {
    clock.now_ = doc.at("now").get<int64_t>();
    for (Task task : kTasksInFiringOrder) {
      clock.next_due_[static_cast<size_t>(task)] =
          doc.at("next_due").at(std::string(TaskName(task))).get<int64_t>();
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed clock: ", e.what()));
  }
  return clock;
}

size_t Selection::size() const {
  size_t n = 0;
  for (const auto& [key, ids] : chosen) n += ids.size();
  return n;
}

std::vector<uint64_t> Selection::record_ids() const {
  std::vector<uint64_t> ids;
  for (const auto& [key, key_ids] : chosen) {
    ids.insert(ids.end(), key_ids.begin(), key_ids.end());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Selection SelectRecords(const Store& store, const ConfigBundle& bundle,
                        RandomSource& rng) {
  std::map<std::string, std::optional<ResolvedKey>> resolved_keys;
  auto resolve = [&](const std::string& key_name) -> const ResolvedKey* {
    auto [it, inserted] = resolved_keys.try_emplace(key_name);
    if (inserted) {
      absl::StatusOr<ResolvedKey> resolved = bundle.Resolve(key_name);
      if (resolved.ok()) it->second = *std::move(resolved);
    }
    return it->second.has_value() ? &*it->second : nullptr;
  };

  const std::vector<PrivatizedRecord>& records = store.records();
  std::vector<size_t> candidates;
  for (size_t i = 0; i < records.size(); ++i) {
    const PrivatizedRecord& record = records[i];
    if (record.submitted || record.version != store.current_version() ||
        record.submission_priority == kNeverSubmitPriority ||
        resolve(record.key_name) == nullptr) {
      continue;
    }
    candidates.push_back(i);
  }

  for (size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[rng.UniformInt(i)]);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b) {
    return records[a].submission_priority < records[b].submission_priority;
  });

  Selection selection;
  std::map<std::string, int64_t> per_key;
  for (size_t index : candidates) {
    const PrivatizedRecord& record = records[index];
    const ResolvedKey& key = *resolve(record.key_name);
    const BudgetRecord* budget = store.FindBudget(key.budget_key_name);
    if (budget == nullptr) continue;
    int64_t& key_count = per_key[record.key_name];
    int64_t& spend = selection.per_budget_spend[key.budget_key_name];
    if (key_count >= key.session_amount_effective || spend >= budget->balance) {
      continue;
    }
    ++key_count;
    ++spend;
    selection.chosen[record.key_name].push_back(record.record_id);
  }
  std::erase_if(selection.per_budget_spend,
                [](const auto& item) { return item.second == 0; });
  for (auto& [key, ids] : selection.chosen) std::sort(ids.begin(), ids.end());
  return selection;
}

absl::StatusOr<ReportGeneration> RunReportGenerator(
    Store& store, const ConfigBundle& bundle, UnixSeconds now,
    RandomSource& rng, LossLedger& ledger, bool shift_7h,
    const std::set<std::string>& taken_paths) {
  ReportGeneration generation;
  generation.selection = SelectRecords(store, bundle, rng);
  if (generation.selection.size() == 0) return generation;

  std::vector<PrivatizedRecord> chosen;
  for (uint64_t id : generation.selection.record_ids()) {
    chosen.push_back(*store.FindRecord(id));
  }
  absl::StatusOr<std::vector<ReportFile>> files =
      RenderReport(chosen, bundle, now, shift_7h, taken_paths);
  if (!files.ok()) return files.status();

  for (const auto& [budget, spend] : generation.selection.per_budget_spend) {
    if (absl::Status status = store.Spend(budget, spend); !status.ok()) {
      return status;
    }
  }
  for (const PrivatizedRecord& record : chosen) {
    if (absl::Status status = store.MarkSubmitted(record.record_id); !status.ok()) {
      return status;
    }
    ledger.Append({now, record.key_name,
                   bundle.Resolve(record.key_name)->budget_key_name,
                   record.epsilon});
  }
  generation.files = *std::move(files);
  return generation;
}

Daemon::Daemon(ConfigBundle bundle, Store store, VirtualClock clock,
               DaemonOptions options)
    : bundle_(std::move(bundle)),
      store_(std::move(store)),
      clock_(clock),
      options_(std::move(options)),
      retention_(options_.retention.value_or(RetentionPolicy::ForBundle(bundle_))),
      base_rng_(options_.seed) {}

Daemon Daemon::OptIn(ConfigBundle bundle, UnixSeconds now, DaemonOptions options) {
  Store store = Store::OptIn(bundle, now, options.store);
  Daemon daemon(std::move(bundle), std::move(store), VirtualClock(now),
                std::move(options));
  daemon.opt_in_time_ = now;
  daemon.Log(absl::StrCat("t=", now, " dprivacyd: accepting work now profile=",
                          daemon.bundle_.profile_name()));
  return daemon;
}

absl::StatusOr<std::optional<PrivatizedRecord>> Daemon::SubmitEvent(
    absl::string_view key_name, const EventDatum& datum) {
  RandomSource rng = base_rng_.Fork(kPrivatizeStream, store_.next_record_id());
  absl::StatusOr<std::optional<PrivatizedRecord>> record =
      store_.SubmitEvent(bundle_, key_name, datum, now(), rng);
  if (!record.ok()) return record.status();
  if (record->has_value()) {
    const PrivatizedRecord& stored = **record;
    Log(absl::StrCat("t=", now(), " event key=", stored.key_name,
                     " record=", stored.record_id, " epsilon=", stored.epsilon,
                     " priority=", stored.submission_priority));
  } else {
    Log(absl::StrCat("t=", now(), " event key=", key_name, " record=none"));
  }
  return record;
}

absl::StatusOr<AdvanceResult> Daemon::Advance(int64_t duration) {
  if (duration < 0) {
    return absl::InvalidArgumentError("advance duration must be non-negative");
  }
  const UnixSeconds target = now() + duration;
  AdvanceResult result;
  while (clock_.NextDueTime() <= target) {
    const UnixSeconds at = clock_.NextDueTime();
    clock_.AdvanceTo(at);
    for (Task task : clock_.DueAt(at)) {
      if (absl::Status status = Fire(task, result); !status.ok()) return status;
      clock_.Reschedule(task);
    }
  }
  clock_.AdvanceTo(target);
  return result;
}

absl::Status Daemon::Fire(Task task, AdvanceResult& result) {
  const UnixSeconds at = now();
  std::string line = absl::StrCat("t=", at, " task=", TaskName(task));
  switch (task) {
    case Task::kBudgetMaintenance: {
      absl::StatusOr<std::vector<BudgetIncrement>> increments =
          store_.UpdateAllBudgets(bundle_, at);
      if (!increments.ok()) return increments.status();
      int64_t total = 0;
      for (const BudgetIncrement& increment : *increments) {
        total += increment.increment;
      }
      absl::StrAppend(&line, " increment=", total);
      if (options_.enable_anomalous_reset) {
        store_.AnomalousBudgetReset(at);
        absl::StrAppend(&line, " anomalous_reset=1");
      }
      break;
    }
    case Task::kReportGenerator: {
      std::set<std::string> taken;
      for (const ReportFile& file : reports_) taken.insert(file.path);
      RandomSource rng = base_rng_.Fork(kSelectStream, report_runs_++);
      absl::StatusOr<ReportGeneration> generation = RunReportGenerator(
          store_, bundle_, at, rng, ledger_, options_.shift_7h, taken);
      if (!generation.ok()) return generation.status();
      absl::StrAppend(&line, " selected=", generation->selection.size(),
                      " files=", generation->files.size());
      for (ReportFile& file : generation->files) {
        absl::StrAppend(&line, " ", file.path, ":", file.entries.size());
        report_sizes_.push_back(file.entries.size());
        result.emitted.push_back(file);
        reports_.push_back(std::move(file));
      }
      break;
    }
    case Task::kStorageCulling:
      absl::StrAppend(&line, " deleted=", store_.StorageCulling(at));
      break;
    case Task::kStorageMaintenance:
      absl::StrAppend(&line, " deleted=", store_.StorageMaintenance(at));
      break;
    case Task::kReportFilesMaintenance: {
      std::vector<ReportFile> deleted =
          ReportFilesMaintenance(reports_, at, retention_);
      absl::StrAppend(&line, " deleted=", deleted.size());
      for (ReportFile& file : deleted) result.deleted.push_back(std::move(file));
      break;
    }
  }
  result.fired.push_back({at, task, line});
  Log(std::move(line));
  return absl::OkStatus();
}

void Daemon::Log(std::string line) { log_.push_back(std::move(line)); }

json Daemon::SnapshotJson(const std::string& profile) const {
  json reports = json::array();
  for (const ReportFile& file : reports_) {
    reports.push_back({{"path", file.path},
                       {"created_at", file.created_at},
                       {"folder", FolderClassName(file.folder_class)}});
  }
  return {{"format", kSnapshotFormat},
          {"profile", profile},
          {"opt_in_time", opt_in_time_},
          {"options",
           {{"seed", options_.seed},
            {"shift_7h", options_.shift_7h},
            {"enable_anomalous_reset", options_.enable_anomalous_reset}}},
          {"retention_seconds", retention_.max_age_seconds},
          {"clock", clock_.ToJson()},
          {"store", store_.ToJson()},
          {"ledger", ledger_.ToJson()},
          {"report_runs", report_runs_},
          {"reports", reports},
          {"report_sizes", report_sizes_}};
}

absl::StatusOr<Daemon> Daemon::FromSnapshot(const json& doc, ConfigBundle bundle) {
  if (!doc.is_object() || doc.value("format", "") != kSnapshotFormat) {
    return absl::InvalidArgumentError("not a dpbudget snapshot");
  }
  absl::StatusOr<Store> store = Store::FromJson(doc.value("store", json()));
  if (!store.ok()) return store.status();
  absl::StatusOr<VirtualClock> clock = VirtualClock::FromJson(doc.value("clock", json()));
  if (!clock.ok()) return clock.status();
  absl::StatusOr<LossLedger> ledger = LossLedger::FromJson(doc.value("ledger", json::array()));
  if (!ledger.ok()) return ledger.status();

  try {
    DaemonOptions options;
    const json& saved = doc.at("options");
    options.seed = saved.at("seed").get<uint64_t>();
    options.shift_7h = saved.at("shift_7h").get<bool>();
    options.enable_anomalous_reset = saved.at("enable_anomalous_reset").get<bool>();
    options.store.current_version = store->current_version();
    options.store.max_records = store->max_records();
    options.retention = RetentionPolicy{doc.at("retention_seconds").get<int64_t>()};

    Daemon daemon(std::move(bundle), *std::move(store), *clock, std::move(options));
    daemon.ledger_ = *std::move(ledger);
    daemon.opt_in_time_ = doc.at("opt_in_time").get<int64_t>();
    daemon.report_runs_ = doc.at("report_runs").get<uint64_t>();
    daemon.report_sizes_ = doc.at("report_sizes").get<std::vector<size_t>>();
    for (const json& item : doc.at("reports")) {
      ReportFile file;
      file.path = item.at("path").get<std::string>();
      file.created_at = item.at("created_at").get<int64_t>();
      file.folder_class = item.at("folder").get<std::string>() == "parsec"
                              ? FolderClass::kParsec
                              : FolderClass::kDiagnostic;
      daemon.reports_.push_back(std::move(file));
    }
    return daemon;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed snapshot: ", e.what()));
  }
}

}  // namespace dpbudget
