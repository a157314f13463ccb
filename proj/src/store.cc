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

#include "dpbudget/store.h"

#include <algorithm>
#include <numeric>

#include "absl/strings/escaping.h"
#include "absl/strings/str_cat.h"

namespace dpbudget {
namespace {

using json = nlohmann::json;

absl::Status SnapshotError(absl::string_view detail) {
  return absl::InvalidArgumentError(absl::StrCat("malformed store snapshot: ", detail));
}

}  // namespace

std::string EncodeBits(const std::vector<uint8_t>& bits) {
  std::string packed((bits.size() + 7) / 8, '\0');
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) packed[i / 8] |= static_cast<char>(1u << (i % 8));
  }
  return absl::Base64Escape(packed);
}

absl::StatusOr<std::vector<uint8_t>> DecodeBits(absl::string_view encoded,
                                                uint32_t m) {
  std::string packed;
  if (!absl::Base64Unescape(encoded, &packed)) {
    return absl::InvalidArgumentError("payload is not valid base64");
  }
  if (packed.size() != (static_cast<size_t>(m) + 7) / 8) {
    return absl::InvalidArgumentError(absl::StrCat(
        "payload holds ", packed.size(), " bytes, expected ", (m + 7) / 8));
  }
  std::vector<uint8_t> bits(m);
  for (size_t i = 0; i < packed.size() * 8; ++i) {
    const bool set = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
    if (i < m) {
      bits[i] = set ? 1 : 0;
    } else if (set) {
      return absl::InvalidArgumentError("payload sets bits beyond m");
    }
  }
  return bits;
}

Store Store::OptIn(const ConfigBundle& bundle, UnixSeconds now,
                   StoreOptions options) {
  Store store;
  store.current_version_ = std::move(options.current_version);
  store.max_records_ = options.max_records;
  for (const auto& [name, budget] : bundle.budgets()) {
    store.budgets_.emplace(
        name, BudgetRecord{name, budget.session_amount, now, now});
  }
  return store;
}

absl::StatusOr<std::optional<PrivatizedRecord>> Store::SubmitEvent(
    const ConfigBundle& bundle, absl::string_view key_name,
    const EventDatum& datum, UnixSeconds now, RandomSource& rng) {
  absl::StatusOr<ResolvedKey> resolved = bundle.Resolve(key_name);
  if (!resolved.ok()) return resolved.status();

  PrivatizedRecord record;
  record.key_name = resolved->key_name;
  record.algorithm = resolved->algorithm;
  record.epsilon = resolved->effective_epsilon;
  record.creation_date = now;
  record.submission_priority = resolved->submission_priority;
  record.version = current_version_;

  const uint32_t m = resolved->params.m;
  if (resolved->algorithm == Algorithm::kOneBitHistogram) {
    const uint32_t bucket =
        std::holds_alternative<Bucket>(datum)
            ? std::get<Bucket>(datum).index
            : HashDatum(std::get<std::string>(datum), 0, m);
    absl::StatusOr<ObhPayload> payload =
        PrivatizeObh(bucket, m, record.epsilon, rng);
    if (!payload.ok()) return payload.status();
    record.payload = *std::move(payload);
  } else {
    const std::string word = std::holds_alternative<Bucket>(datum)
                                 ? absl::StrCat(std::get<Bucket>(datum).index)
                                 : std::get<std::string>(datum);
    if (word.empty()) return absl::InvalidArgumentError("EmptyDatum");
    if (seen_.contains({record.key_name, word})) return std::nullopt;
    absl::StatusOr<CmsPayload> payload =
        PrivatizeCms(word, record.epsilon, resolved->params.k, m, rng);
    if (!payload.ok()) return payload.status();
    record.payload = *std::move(payload);
    seen_.emplace(record.key_name, word);
  }

  record.record_id = next_record_id_++;
  records_.push_back(record);
  return record;
}

absl::StatusOr<std::vector<BudgetIncrement>> Store::UpdateAllBudgets(
    const ConfigBundle& bundle, UnixSeconds now) {
  for (const auto& [name, budget] : budgets_) {
    if (now < budget.last_update) {
      return absl::FailedPreconditionError(absl::StrCat(
          "ClockWentBackwards: now ", now, " precedes last update ",
          budget.last_update, " of ", name));
    }
  }
  std::vector<BudgetIncrement> increments;
  for (auto& [name, budget] : budgets_) {
    const BudgetEntry* entry = bundle.FindBudget(name);
    int64_t increment = 0;
    if (entry != nullptr) {
      const int64_t sessions = (now - budget.last_update) / entry->session_seconds;
      increment = entry->session_amount * sessions;
      budget.balance += increment;
      budget.last_update += sessions * entry->session_seconds;
    }
    increments.push_back({name, increment});
  }
  return increments;
}

int Store::StorageCulling(UnixSeconds /*now*/) {
  const size_t before = records_.size();
  std::erase_if(records_, [this](const PrivatizedRecord& record) {
    return record.submitted || record.version != current_version_;
  });
  return static_cast<int>(before - records_.size());
}

int Store::StorageMaintenance(UnixSeconds now) {
  const size_t before = records_.size();
  std::erase_if(records_, [now](const PrivatizedRecord& record) {
    return now - record.creation_date > kSecondsIn14Day;
  });
  if (records_.size() > max_records_) {
    std::vector<size_t> order(records_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [this](size_t a, size_t b) {
      return records_[a].creation_date < records_[b].creation_date;
    });
    std::vector<bool> drop(records_.size(), false);
    for (size_t i = 0; i < records_.size() - max_records_; ++i) {
      drop[order[i]] = true;
    }
    std::vector<PrivatizedRecord> kept;
    kept.reserve(max_records_);
    for (size_t i = 0; i < records_.size(); ++i) {
      if (!drop[i]) kept.push_back(std::move(records_[i]));
    }
    records_ = std::move(kept);
  }
  return static_cast<int>(before - records_.size());
}

std::vector<BudgetRecord> Store::AnomalousBudgetReset(UnixSeconds /*now*/) {
  std::vector<BudgetRecord> updated;
  for (auto& [name, budget] : budgets_) {
    budget.balance = (budget.last_update - budget.creation_date) / kSecondsInOneDay;
    updated.push_back(budget);
  }
  return updated;
}

absl::Status Store::MarkSubmitted(uint64_t record_id) {
  auto it = std::lower_bound(
      records_.begin(), records_.end(), record_id,
      [](const PrivatizedRecord& r, uint64_t id) { return r.record_id < id; });
  if (it == records_.end() || it->record_id != record_id) {
    return absl::NotFoundError(absl::StrCat("no record ", record_id));
  }
  if (it->submitted) {
    return absl::FailedPreconditionError(
        absl::StrCat("record ", record_id, " already submitted"));
  }
  it->submitted = true;
  return absl::OkStatus();
}

absl::Status Store::Spend(absl::string_view budget_key_name, int64_t amount) {
  auto it = budgets_.find(std::string(budget_key_name));
  if (it == budgets_.end()) {
    return absl::NotFoundError(absl::StrCat("no budget ", budget_key_name));
  }
  if (amount < 0 || amount > it->second.balance) {
    return absl::FailedPreconditionError(
        absl::StrCat("cannot spend ", amount, " from ", budget_key_name,
                     " with balance ", it->second.balance));
  }
  it->second.balance -= amount;
  return absl::OkStatus();
}

const BudgetRecord* Store::FindBudget(absl::string_view budget_key_name) const {
  auto it = budgets_.find(std::string(budget_key_name));
  return it == budgets_.end() ? nullptr : &it->second;
}

const PrivatizedRecord* Store::FindRecord(uint64_t record_id) const {
  auto it = std::lower_bound(
      records_.begin(), records_.end(), record_id,
      [](const PrivatizedRecord& r, uint64_t id) { return r.record_id < id; });
  return it == records_.end() || it->record_id != record_id ? nullptr : &*it;
}

uint64_t Store::InsertRecordForTesting(PrivatizedRecord record) {
  record.record_id = next_record_id_++;
  records_.push_back(std::move(record));
  return records_.back().record_id;
}

json Store::ToJson() const {
  json records = json::array();
  for (const PrivatizedRecord& record : records_) {
    json payload;
    const std::vector<uint8_t>& bits = PayloadBits(record.payload);
    payload["m"] = bits.size();
    payload["bits"] = EncodeBits(bits);
    if (const auto* cms = std::get_if<CmsPayload>(&record.payload)) {
      payload["row"] = cms->row;
    }
    records.push_back({{"id", record.record_id},
                       {"key_name", record.key_name},
                       {"algorithm", AlgorithmName(record.algorithm)},
                       {"payload", payload},
                       {"epsilon", record.epsilon},
                       {"creation_date", record.creation_date},
                       {"submitted", record.submitted},
                       {"submission_priority", record.submission_priority},
                       {"version", record.version}});
  }
  json budgets = json::array();
  for (const auto& [name, budget] : budgets_) {
    budgets.push_back({{"budget_key_name", name},
                       {"balance", budget.balance},
                       {"last_update", budget.last_update},
                       {"creation_date", budget.creation_date}});
  }
  json seen = json::array();
  for (const auto& [key, word] : seen_) seen.push_back({key, word});
  return {{"records", records},
          {"budgets", budgets},
          {"seen_words", seen},
          {"current_version", current_version_},
          {"max_records", max_records_},
          {"next_record_id", next_record_id_}};
}

absl::StatusOr<Store> Store::FromJson(const json& doc) {
  Store store;
  try {
    store.current_version_ = doc.at("current_version").get<std::string>();
    store.max_records_ = doc.at("max_records").get<size_t>();
    store.next_record_id_ = doc.at("next_record_id").get<uint64_t>();
    for (const json& item : doc.at("budgets")) {
      BudgetRecord budget;
      budget.budget_key_name = item.at("budget_key_name").get<std::string>();
      budget.balance = item.at("balance").get<int64_t>();
      budget.last_update = item.at("last_update").get<int64_t>();
      budget.creation_date = item.at("creation_date").get<int64_t>();
      store.budgets_.emplace(budget.budget_key_name, budget);
    }
    for (const json& item : doc.at("seen_words")) {
      store.seen_.emplace(item.at(0).get<std::string>(),
                          item.at(1).get<std::string>());
    }
    uint64_t previous_id = 0;
    for (const json& item : doc.at("records")) {
      PrivatizedRecord record;
      record.record_id = item.at("id").get<uint64_t>();
      if (record.record_id <= previous_id ||
          record.record_id >= store.next_record_id_) {
        return SnapshotError("record ids must be increasing");
      }
      previous_id = record.record_id;
      record.key_name = item.at("key_name").get<std::string>();
      absl::StatusOr<Algorithm> algorithm =
          ParseAlgorithm(item.at("algorithm").get<std::string>());
      if (!algorithm.ok()) return SnapshotError(algorithm.status().message());
      record.algorithm = *algorithm;
      const json& payload = item.at("payload");
      absl::StatusOr<std::vector<uint8_t>> bits = DecodeBits(
          payload.at("bits").get<std::string>(), payload.at("m").get<uint32_t>());
      if (!bits.ok()) return SnapshotError(bits.status().message());
      if (record.algorithm == Algorithm::kOneBitHistogram) {
        record.payload = ObhPayload{*std::move(bits)};
      } else {
        record.payload = CmsPayload{payload.at("row").get<uint32_t>(), *std::move(bits)};
      }
      record.epsilon = item.at("epsilon").get<double>();
      record.creation_date = item.at("creation_date").get<int64_t>();
      record.submitted = item.at("submitted").get<bool>();
      record.submission_priority = item.at("submission_priority").get<int>();
      record.version = item.at("version").get<std::string>();
      store.records_.push_back(std::move(record));
    }
  } catch (const json::exception& e) {
    return SnapshotError(e.what());
  }
  return store;
}

}  // namespace dpbudget
