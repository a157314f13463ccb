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

#ifndef DPBUDGET_CONFIG_H_
#define DPBUDGET_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace dpbudget {

using UnixSeconds = int64_t;

inline constexpr int64_t kSecondsInOneDay = 86400;

// Constants the daemon treats as compiled-in. Configuration documents cannot
// override them.
inline constexpr double kEpsilonMax = 2.0;
inline constexpr double kClampedEpsilon = 1.0;
inline constexpr int kRecordCap = 40;
inline constexpr int kDefaultPriority = 0;
inline constexpr int kNeverSubmitPriority = 99999;

enum class Algorithm { kOneBitHistogram, kCountMedianSketch };

absl::string_view AlgorithmName(Algorithm algorithm);
absl::StatusOr<Algorithm> ParseAlgorithm(absl::string_view name);

struct KeyNameEntry {
  std::string key_name;
  std::string properties_name;
};

struct PropertiesEntry {
  std::string properties_name;
  Algorithm algorithm = Algorithm::kOneBitHistogram;
  double privacy_parameter = 1.0;
  std::string budget_key_name;
  // Present only in configurations that carry the SubmissionPriority field.
  std::optional<int> submission_priority;
};

struct BudgetEntry {
  std::string budget_key_name;
  int64_t session_seconds = kSecondsInOneDay;
  int64_t session_amount = 1;
};

struct AlgorithmParams {
  Algorithm algorithm = Algorithm::kOneBitHistogram;
  uint32_t m = 1024;
  uint32_t k = 1;
};

// The raw text of the four configuration documents plus an optional profile
// manifest.
struct ConfigDocuments {
  std::string keynames;
  std::string keyproperties;
  std::string algorithmparameters;
  std::string budgetproperties;
  std::string profile;  // may be empty
};

struct ResolvedKey {
  std::string key_name;
  std::string properties_name;
  Algorithm algorithm = Algorithm::kOneBitHistogram;
  double configured_epsilon = 0.0;
  double effective_epsilon = 0.0;
  int submission_priority = kDefaultPriority;
  std::string budget_key_name;
  int64_t session_amount = 0;
  int64_t session_amount_effective = 0;
  int64_t session_seconds = 0;
  AlgorithmParams params;

  bool submittable() const {
    return submission_priority != kNeverSubmitPriority;
  }
  bool operator==(const ResolvedKey&) const = default;
};

// Immutable after loading; cross references are validated by LoadConfig.
class ConfigBundle {
 public:
  const std::string& profile_name() const { return profile_name_; }
  const std::string& platform() const { return platform_; }
  int64_t report_retention_seconds() const { return report_retention_seconds_; }
  double epsilon_max() const { return kEpsilonMax; }
  int record_cap() const { return kRecordCap; }

  const std::map<std::string, KeyNameEntry>& key_names() const {
    return key_names_;
  }
  const std::map<std::string, PropertiesEntry>& properties() const {
    return properties_;
  }
  const std::map<std::string, BudgetEntry>& budgets() const {
    return budgets_;
  }
  const std::map<Algorithm, AlgorithmParams>& algorithm_params() const {
    return algorithm_params_;
  }

  // True if any properties entry carries an explicit SubmissionPriority.
  bool has_submission_priority() const;

  const BudgetEntry* FindBudget(absl::string_view budget_key_name) const;
  const PropertiesEntry* FindProperties(absl::string_view properties_name) const;

  // KeyName -> PropertiesName -> (algorithm, epsilon, budget key), with the
  // epsilon clamp and record cap applied.
  absl::StatusOr<ResolvedKey> Resolve(absl::string_view key_name) const;

 private:
  friend absl::StatusOr<ConfigBundle> LoadConfig(const ConfigDocuments&);
  friend absl::StatusOr<ConfigBundle> LoadProfile(const std::string&);

  std::string profile_name_;
  std::string platform_ = "macos";
  int64_t report_retention_seconds_ = 30 * kSecondsInOneDay;
  std::map<std::string, KeyNameEntry> key_names_;
  std::map<std::string, PropertiesEntry> properties_;
  std::map<std::string, BudgetEntry> budgets_;
  std::map<Algorithm, AlgorithmParams> algorithm_params_;
};

struct ClampResult {
  double effective_epsilon;
  int submission_priority;
  bool operator==(const ClampResult&) const = default;
};

// Requested epsilons above the bundle's epsilon_max are replaced with 1 and
// the record is tagged with the never-submit priority.
absl::StatusOr<ClampResult> ClampEpsilon(double requested,
                                         const ConfigBundle& bundle);

// min(session_amount, 40)
int64_t EffectiveRecordCap(int64_t session_amount);

absl::StatusOr<ConfigBundle> LoadConfig(const ConfigDocuments& documents);

// Reads keynames.json, keyproperties.json, algorithmparameters.json,
// budgetproperties.json and (optionally) profile.json from `directory`.
absl::StatusOr<ConfigDocuments> ReadConfigDirectory(const std::string& directory);

// `name_or_path` is either a bundled profile name (resolved against
// DPBUDGET_PROFILE_DIR or the $DPBUDGET_PROFILE_DIR override) or a directory.
absl::StatusOr<ConfigBundle> LoadProfile(const std::string& name_or_path);

std::vector<std::string> BundledProfileNames();

}  // namespace dpbudget

#endif  // DPBUDGET_CONFIG_H_
