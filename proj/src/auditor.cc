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

#include "dpbudget/auditor.h"

#include <algorithm>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace dpbudget {
namespace {

using json = nlohmann::json;

constexpr const char* kFourApps[] = {
    "com.apple.keyboard.NewWords", "com.apple.parsec.AppDeepLink",
    "com.apple.parsec.Search", "com.apple.keyboard.Emoji"};

std::string Num(double value) { return absl::StrFormat("%g", value); }

double DailyLoss(const ConfigBundle& bundle, const BudgetEntry& budget) {
  return BudgetEpsilon(bundle, budget.budget_key_name) * budget.session_amount *
         static_cast<double>(kSecondsInOneDay) / budget.session_seconds;
}

absl::Status CheckScope(const ConfigBundle& bundle,
                        std::span<const std::string> scope) {
  for (const std::string& name : scope) {
    if (bundle.FindBudget(name) == nullptr) {
      return absl::NotFoundError(absl::StrCat("UnknownBudgetKey: ", name));
    }
  }
  return absl::OkStatus();
}

}  // namespace

json LossLedger::ToJson() const {
  json out = json::array();
  for (const LossEntry& entry : entries_) {
    out.push_back({{"timestamp", entry.timestamp},
                   {"key_name", entry.key_name},
                   {"budget_key_name", entry.budget_key_name},
                   {"epsilon", entry.epsilon}});
  }
  return out;
}

absl::StatusOr<LossLedger> LossLedger::FromJson(const json& doc) {
  LossLedger ledger;
  try {
    for (const json& item : doc) {
      ledger.Append({item.at("timestamp").get<int64_t>(),
                     item.at("key_name").get<std::string>(),
                     item.at("budget_key_name").get<std::string>(),
                     item.at("epsilon").get<double>()});
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed ledger: ", e.what()));
  }
  return ledger;
}

absl::StatusOr<std::vector<std::string>> ResolveScope(
    const ConfigBundle& bundle, std::span<const std::string> tokens) {
  std::set<std::string> scope;
  for (const std::string& token : tokens) {
    if (token == "all") {
      for (const auto& [name, budget] : bundle.budgets()) scope.insert(name);
      continue;
    }
    if (token == "four-apps") {
      for (const char* name : kFourApps) {
        if (bundle.FindBudget(name) == nullptr) {
          return absl::NotFoundError(absl::StrCat("UnknownBudgetKey: ", name));
        }
        scope.insert(name);
      }
      continue;
    }
    if (bundle.FindBudget(token) != nullptr) {
      scope.insert(token);
      continue;
    }
    std::vector<std::string> matches;
    for (const auto& [name, budget] : bundle.budgets()) {
      if (absl::EndsWithIgnoreCase(name, absl::StrCat(".", token))) {
        matches.push_back(name);
      }
    }
    if (matches.empty()) {
      return absl::NotFoundError(absl::StrCat("UnknownBudgetKey: ", token));
    }
    if (matches.size() > 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("ambiguous budget key '", token, "'"));
    }
    scope.insert(matches.front());
  }
  return std::vector<std::string>(scope.begin(), scope.end());
}

absl::StatusOr<double> PerDatumLoss(absl::string_view key_name,
                                    const ConfigBundle& bundle) {
  absl::StatusOr<ResolvedKey> resolved = bundle.Resolve(key_name);
  if (!resolved.ok()) return resolved.status();
  return resolved->effective_epsilon;
}

double BudgetEpsilon(const ConfigBundle& bundle, absl::string_view budget_key_name) {
  double epsilon = 0.0;
  for (const auto& [key_name, entry] : bundle.key_names()) {
    absl::StatusOr<ResolvedKey> resolved = bundle.Resolve(key_name);
    if (!resolved.ok() || resolved->budget_key_name != budget_key_name ||
        !resolved->submittable()) {
      continue;
    }
    epsilon = std::max(epsilon, resolved->effective_epsilon);
  }
  return epsilon;
}

absl::StatusOr<LossReport> SessionLossBound(const ConfigBundle& bundle,
                                            std::span<const std::string> scope) {
  if (absl::Status status = CheckScope(bundle, scope); !status.ok()) return status;
  std::set<std::string> unique(scope.begin(), scope.end());
  LossReport report;
  for (const std::string& name : unique) {
    const BudgetEntry& budget = *bundle.FindBudget(name);
    BudgetLoss row;
    row.budget_key_name = name;
    row.epsilon_per_datum = BudgetEpsilon(bundle, name);
    row.session_amount = budget.session_amount;
    row.session_seconds = budget.session_seconds;
    row.session_loss = row.epsilon_per_datum * budget.session_amount;
    row.daily_loss = DailyLoss(bundle, budget);
    report.total_daily_loss += row.daily_loss;
    report.rows.push_back(std::move(row));
  }
  return report;
}

absl::StatusOr<double> LifetimeLossBound(const ConfigBundle& bundle,
                                         std::span<const std::string> scope,
                                         int64_t days) {
  if (days < 0) return absl::InvalidArgumentError("days must be non-negative");
  absl::StatusOr<LossReport> report = SessionLossBound(bundle, scope);
  if (!report.ok()) return report.status();
  double total = 0.0;
  for (const BudgetLoss& row : report->rows) {
    total += row.session_loss * static_cast<double>(days) * kSecondsInOneDay /
             row.session_seconds;
  }
  return total;
}

absl::StatusOr<double> AccruedLossBound(const ConfigBundle& bundle,
                                        std::span<const std::string> scope,
                                        int64_t elapsed_seconds) {
  if (elapsed_seconds < 0) {
    return absl::InvalidArgumentError("elapsed time must be non-negative");
  }
  absl::StatusOr<LossReport> report = SessionLossBound(bundle, scope);
  if (!report.ok()) return report.status();
  double total = 0.0;
  for (const BudgetLoss& row : report->rows) {
    total += row.session_loss *
             static_cast<double>(elapsed_seconds / row.session_seconds + 1);
  }
  return total;
}

RealizedLoss ComputeRealizedLoss(const LossLedger& ledger, UnixSeconds since) {
  RealizedLoss loss;
  for (const LossEntry& entry : ledger.entries()) {
    if (entry.timestamp < since) continue;
    loss.total += entry.epsilon;
    loss.per_budget_key[entry.budget_key_name] += entry.epsilon;
  }
  return loss;
}

absl::string_view ChangeKindName(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::kBudget:
      return "budget";
    case ChangeKind::kProperties:
      return "properties";
    case ChangeKind::kKeyName:
      return "keyname";
    case ChangeKind::kFeature:
      return "feature";
  }
  return "unknown";
}

ProfileDiff DiffProfiles(const ConfigBundle& before, const ConfigBundle& after) {
  ProfileDiff diff;
  auto changed = [&diff](ChangeKind kind, const std::string& subject,
                         std::string field, std::string old_value,
                         std::string new_value) {
    if (old_value == new_value) return;
    diff.changes.push_back({kind, subject, std::move(field),
                            std::move(old_value), std::move(new_value)});
  };

  std::set<std::string> budget_names;
  for (const auto& [name, b] : before.budgets()) budget_names.insert(name);
  for (const auto& [name, b] : after.budgets()) budget_names.insert(name);
  for (const std::string& name : budget_names) {
    const BudgetEntry* a = before.FindBudget(name);
    const BudgetEntry* b = after.FindBudget(name);
    if (a == nullptr || b == nullptr) {
      changed(ChangeKind::kBudget, name, "present", a ? "yes" : "no",
              b ? "yes" : "no");
    } else {
      changed(ChangeKind::kBudget, name, "SessionSeconds",
              absl::StrCat(a->session_seconds), absl::StrCat(b->session_seconds));
      changed(ChangeKind::kBudget, name, "SessionAmount",
              absl::StrCat(a->session_amount), absl::StrCat(b->session_amount));
    }
    const double old_loss = a ? DailyLoss(before, *a) : 0.0;
    const double new_loss = b ? DailyLoss(after, *b) : 0.0;
    if (new_loss != old_loss) {
      diff.daily_loss_delta[name] = new_loss - old_loss;
      diff.total_daily_loss_delta += new_loss - old_loss;
    }
  }

  std::set<std::string> properties_names;
  for (const auto& [name, p] : before.properties()) properties_names.insert(name);
  for (const auto& [name, p] : after.properties()) properties_names.insert(name);
  for (const std::string& name : properties_names) {
    const PropertiesEntry* a = before.FindProperties(name);
    const PropertiesEntry* b = after.FindProperties(name);
    if (a == nullptr || b == nullptr) {
      changed(ChangeKind::kProperties, name, "present", a ? "yes" : "no",
              b ? "yes" : "no");
      continue;
    }
    changed(ChangeKind::kProperties, name, "PrivatizationAlgorithm",
            std::string(AlgorithmName(a->algorithm)),
            std::string(AlgorithmName(b->algorithm)));
    changed(ChangeKind::kProperties, name, "PrivacyParameter",
            Num(a->privacy_parameter), Num(b->privacy_parameter));
    changed(ChangeKind::kProperties, name, "BudgetKeyName", a->budget_key_name,
            b->budget_key_name);
  }

  std::set<std::string> key_names;
  for (const auto& [name, k] : before.key_names()) key_names.insert(name);
  for (const auto& [name, k] : after.key_names()) key_names.insert(name);
  for (const std::string& name : key_names) {
    auto a = before.key_names().find(name);
    auto b = after.key_names().find(name);
    const bool in_a = a != before.key_names().end();
    const bool in_b = b != after.key_names().end();
    if (!in_a || !in_b) {
      changed(ChangeKind::kKeyName, name, "present", in_a ? "yes" : "no",
              in_b ? "yes" : "no");
    } else {
      changed(ChangeKind::kKeyName, name, "PropertiesName",
              a->second.properties_name, b->second.properties_name);
    }
  }

  changed(ChangeKind::kFeature, "SubmissionPriority", "present",
          before.has_submission_priority() ? "yes" : "no",
          after.has_submission_priority() ? "yes" : "no");
  return diff;
}

std::string FormatLossReport(const LossReport& report) {
  size_t width = absl::string_view("BudgetKeyName").size();
  for (const BudgetLoss& row : report.rows) {
    width = std::max(width, row.budget_key_name.size());
  }
  std::string out = absl::StrFormat("%-*s %8s %8s %10s %12s %10s\n",
                                    static_cast<int>(width), "BudgetKeyName",
                                    "epsilon", "amount", "seconds",
                                    "session_loss", "daily_loss");
  for (const BudgetLoss& row : report.rows) {
    absl::StrAppend(
        &out, absl::StrFormat("%-*s %8g %8d %10d %12g %10g\n",
                              static_cast<int>(width), row.budget_key_name,
                              row.epsilon_per_datum, row.session_amount,
                              row.session_seconds, row.session_loss,
                              row.daily_loss));
  }
  absl::StrAppend(&out, absl::StrFormat("%-*s %*g\n", static_cast<int>(width),
                                        "total daily loss", 52,
                                        report.total_daily_loss));
  return out;
}

json LossReportToJson(const LossReport& report) {
  json rows = json::array();
  for (const BudgetLoss& row : report.rows) {
    rows.push_back({{"budget_key_name", row.budget_key_name},
                    {"epsilon_per_datum", row.epsilon_per_datum},
                    {"session_amount", row.session_amount},
                    {"session_seconds", row.session_seconds},
                    {"session_loss", row.session_loss},
                    {"daily_loss", row.daily_loss}});
  }
  return {{"rows", rows}, {"total_daily_loss", report.total_daily_loss}};
}

std::string FormatProfileDiff(const ProfileDiff& diff) {
  std::string out;
  for (const ProfileChange& change : diff.changes) {
    absl::StrAppend(&out, absl::StrFormat("%-10s %-50s %-22s %s -> %s\n",
                                          ChangeKindName(change.kind),
                                          change.subject, change.field,
                                          change.before, change.after));
  }
  for (const auto& [name, delta] : diff.daily_loss_delta) {
    absl::StrAppend(&out, absl::StrFormat("daily loss %-50s %+g\n", name, delta));
  }
  absl::StrAppend(&out, absl::StrFormat("total daily loss change %+g\n",
                                        diff.total_daily_loss_delta));
  return out;
}

json ProfileDiffToJson(const ProfileDiff& diff) {
  json changes = json::array();
  for (const ProfileChange& change : diff.changes) {
    changes.push_back({{"kind", ChangeKindName(change.kind)},
                       {"subject", change.subject},
                       {"field", change.field},
                       {"before", change.before},
                       {"after", change.after}});
  }
  return {{"changes", changes},
          {"daily_loss_delta", diff.daily_loss_delta},
          {"total_daily_loss_delta", diff.total_daily_loss_delta}};
}

}  // namespace dpbudget
