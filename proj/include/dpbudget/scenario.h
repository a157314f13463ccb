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

// Plain-text scenario scripts, one step per line:
//
//   # comment
//   optin                          (must be the first step)
//   event <KeyName> <datum...>     (datum "#7" means histogram bucket 7)
//   advance <duration>             (e.g. 90, 30m, 18h, 19d, 1w)
//   assert <query...> <op> <value> (op: == != <= >= < >)
//   repeat <n>
//     ...
//   end
//
// Queries: realized_loss, balance <budget key>, records, unsubmitted,
// submitted, reports, report_sizes, now.

#ifndef DPBUDGET_SCENARIO_H_
#define DPBUDGET_SCENARIO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpbudget/config.h"
#include "dpbudget/daemon.h"
#include "dpbudget/store.h"

namespace dpbudget {

struct ScenarioStep {
  enum class Kind { kOptIn, kEvent, kAdvance, kAssert };
  Kind kind = Kind::kOptIn;
  int line = 0;
  std::string key_name;
  EventDatum datum;
  int64_t duration = 0;
  std::vector<std::string> query;
  std::string op;
  std::string expected;
};

struct Scenario {
  std::vector<ScenarioStep> steps;  // repeat blocks already expanded
};

// Seconds from "<n>[s|m|h|d|w]".
absl::StatusOr<int64_t> ParseDuration(absl::string_view text);

// "#<n>" is a bucket, anything else a string datum.
EventDatum ParseDatum(absl::string_view text);

// Errors carry the "ScriptParseError" prefix and the line number.
absl::StatusOr<Scenario> ParseScenario(absl::string_view text);

absl::StatusOr<std::string> EvaluateQuery(const Daemon& daemon,
                                          std::span<const std::string> query);

struct ScenarioOptions {
  uint64_t seed = 0;
  bool shift_7h = false;
  bool enable_anomalous_reset = false;
  UnixSeconds start = 0;
  // When set, emitted report files are written here and expired ones removed.
  std::optional<std::filesystem::path> workdir;
};

struct ScenarioOutcome {
  std::string transcript;
  std::vector<std::string> failures;
  std::optional<Daemon> daemon;

  bool passed() const { return failures.empty(); }
};

absl::StatusOr<ScenarioOutcome> RunScenario(const Scenario& scenario,
                                            const ConfigBundle& bundle,
                                            const ScenarioOptions& options);

}  // namespace dpbudget

#endif  // DPBUDGET_SCENARIO_H_
