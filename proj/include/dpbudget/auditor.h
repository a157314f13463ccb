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

// Privacy-loss accounting under basic sequential composition.
//
// A budget key b with per-datum epsilon e_b and SessionAmount a_b permits a
// loss of e_b * a_b every SessionSeconds s_b, and unspent balance rolls over.
// e_b is the largest effective epsilon over the submittable KeyNames charged
// to b; keys tagged never-submit contribute nothing.

#ifndef DPBUDGET_AUDITOR_H_
#define DPBUDGET_AUDITOR_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpbudget/config.h"
#include "json.hpp"

namespace dpbudget {

struct LossEntry {
  UnixSeconds timestamp = 0;
  std::string key_name;
  std::string budget_key_name;
  double epsilon = 0.0;
  bool operator==(const LossEntry&) const = default;
};

// Append-only record of every submitted datum's epsilon.
class LossLedger {
 public:
  void Append(LossEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<LossEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  nlohmann::json ToJson() const;
  static absl::StatusOr<LossLedger> FromJson(const nlohmann::json& doc);

  bool operator==(const LossLedger&) const = default;

 private:
  std::vector<LossEntry> entries_;
};

struct BudgetLoss {
  std::string budget_key_name;
  double epsilon_per_datum = 0.0;
  int64_t session_amount = 0;
  int64_t session_seconds = 0;
  double session_loss = 0.0;  // epsilon_per_datum * session_amount
  double daily_loss = 0.0;    // session_loss normalized to 86400 seconds
};

struct LossReport {
  std::vector<BudgetLoss> rows;  // sorted by budget key
  double total_daily_loss = 0.0;
};

// Named scopes: "four-apps" (NewWords, AppDeepLink, Search, Emoji) and "all".
// Other tokens match a BudgetKeyName exactly or by its last dotted
// component(s), e.g. "NewWords" -> "com.apple.keyboard.NewWords".
absl::StatusOr<std::vector<std::string>> ResolveScope(
    const ConfigBundle& bundle, std::span<const std::string> tokens);

absl::StatusOr<double> PerDatumLoss(absl::string_view key_name,
                                    const ConfigBundle& bundle);

// Per-datum epsilon charged to a budget key (0 if no submittable key uses it).
double BudgetEpsilon(const ConfigBundle& bundle, absl::string_view budget_key_name);

absl::StatusOr<LossReport> SessionLossBound(const ConfigBundle& bundle,
                                            std::span<const std::string> scope);

// session_loss * days * 86400 / session_seconds, summed over the scope.
absl::StatusOr<double> LifetimeLossBound(const ConfigBundle& bundle,
                                         std::span<const std::string> scope,
                                         int64_t days);

// Loss the budget ledger can have paid for after `elapsed` seconds: the
// opt-in grant plus one SessionAmount per whole session,
// sum of e_b * a_b * (floor(elapsed / s_b) + 1).
absl::StatusOr<double> AccruedLossBound(const ConfigBundle& bundle,
                                        std::span<const std::string> scope,
                                        int64_t elapsed_seconds);

struct RealizedLoss {
  double total = 0.0;
  std::map<std::string, double> per_budget_key;
};

// Sum of epsilon over ledger entries with timestamp >= since.
RealizedLoss ComputeRealizedLoss(const LossLedger& ledger, UnixSeconds since = 0);

enum class ChangeKind { kBudget, kProperties, kKeyName, kFeature };
absl::string_view ChangeKindName(ChangeKind kind);

struct ProfileChange {
  ChangeKind kind;
  std::string subject;  // BudgetKeyName, PropertiesName, KeyName or feature
  std::string field;    // "present" for additions and removals
  std::string before;
  std::string after;
  bool operator==(const ProfileChange&) const = default;
};

struct ProfileDiff {
  std::vector<ProfileChange> changes;
  std::map<std::string, double> daily_loss_delta;  // nonzero entries only
  double total_daily_loss_delta = 0.0;
  bool empty() const { return changes.empty(); }
};

ProfileDiff DiffProfiles(const ConfigBundle& before, const ConfigBundle& after);

std::string FormatLossReport(const LossReport& report);
nlohmann::json LossReportToJson(const LossReport& report);
std::string FormatProfileDiff(const ProfileDiff& diff);
nlohmann::json ProfileDiffToJson(const ProfileDiff& diff);

}  // namespace dpbudget

#endif  // DPBUDGET_AUDITOR_H_
