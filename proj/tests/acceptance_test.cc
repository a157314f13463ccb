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

// End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
// with its wall time and exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "dpbudget/auditor.h"
#include "dpbudget/collector.h"
#include "dpbudget/config.h"
#include "dpbudget/daemon.h"
#include "dpbudget/kernels.h"
#include "dpbudget/privatizer.h"
#include "dpbudget/report_io.h"
#include "dpbudget/scenario.h"
#include "proptests/proptests.h"

namespace dpbudget {
namespace {

namespace fs = std::filesystem;

constexpr int64_t kHour = 3600;
constexpr int64_t kDay = kSecondsInOneDay;

// A criterion returns an empty string on success, otherwise what went wrong.
struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<std::string()> check;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::StatusOr<ScenarioOutcome> RunBundledScenario(const std::string& name,
                                                   uint64_t seed,
                                                   std::optional<fs::path> workdir) {
  absl::StatusOr<Scenario> scenario =
      ParseScenario(ReadFile(fs::path(DPBUDGET_SCENARIO_DIR) / name));
  if (!scenario.ok()) return scenario.status();
  absl::StatusOr<ConfigBundle> bundle = LoadProfile("macos-10.12.3");
  if (!bundle.ok()) return bundle.status();
  ScenarioOptions options;
  options.seed = seed;
  options.workdir = std::move(workdir);
  return RunScenario(*scenario, *bundle, options);
}

std::string CheckAudit() {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
      {"macos-10.12.3", {"four-apps"}},
      {"macos-10.12.3", {"NewWords", "Search", "Emoji"}},
      {"macos-10.12.1", {"four-apps"}}};
  const std::vector<double> expected = {16, 6, 14};
  for (size_t i = 0; i < cases.size(); ++i) {
    absl::StatusOr<ConfigBundle> bundle = LoadProfile(cases[i].first);
    if (!bundle.ok()) return std::string(bundle.status().message());
    absl::StatusOr<std::vector<std::string>> scope =
        ResolveScope(*bundle, cases[i].second);
    if (!scope.ok()) return std::string(scope.status().message());
    absl::StatusOr<LossReport> report = SessionLossBound(*bundle, *scope);
    if (!report.ok()) return std::string(report.status().message());
    if (report->total_daily_loss != expected[i]) {
      return absl::StrCat(cases[i].first, " total ", report->total_daily_loss,
                          " expected ", expected[i]);
    }
  }
  return "";
}

std::string CheckScenario(const std::string& name,
                          const std::vector<size_t>& sizes, double loss) {
  absl::StatusOr<ScenarioOutcome> outcome = RunBundledScenario(name, 0, std::nullopt);
  if (!outcome.ok()) return std::string(outcome.status().message());
  if (!outcome->passed()) return absl::StrJoin(outcome->failures, "; ");
  if (outcome->daemon->report_sizes() != sizes) {
    return absl::StrCat("report sizes ",
                        absl::StrJoin(outcome->daemon->report_sizes(), ","));
  }
  const double realized = ComputeRealizedLoss(outcome->daemon->ledger()).total;
  if (realized != loss) return absl::StrCat("realized loss ", realized);
  return "";
}

std::string CheckLifetime() {
  absl::StatusOr<ConfigBundle> bundle = LoadProfile("macos-10.12.3");
  if (!bundle.ok()) return std::string(bundle.status().message());
  const proptests::OpSequence seq = proptests::SaturatingSequence(
      {"com.apple.keyboard.Emoji.en_US.EmojiKeyboard",
       "com.apple.keyboard.NewWords.en_US", "com.apple.parsec.AppDeepLink",
       "com.apple.lookup.DomainMatch"},
      3, 365);
  const proptests::PropertyResult result =
      proptests::CheckBudgetConservation(seq, *bundle, 365);
  if (!result.passed) return result.counterexample;
  const double bound = 16.0 * 365;
  if (result.realized_loss < 0 || result.realized_loss > bound) {
    return absl::StrCat("realized ", result.realized_loss, " outside [0, ", bound, "]");
  }
  if (result.realized_loss < 0.95 * bound) {
    return absl::StrCat("realized ", result.realized_loss, " below ", 0.95 * bound);
  }
  return "";
}

std::string CheckClamp() {
  ConfigDocuments docs;
  docs.keynames = R"({"k.loud": "Loud", "k.calm": "Calm"})";
  docs.keyproperties = R"({
    "Loud": {"PrivatizationAlgorithm": "OneBitHistogram", "PrivacyParameter": 5,
             "BudgetKeyName": "b"},
    "Calm": {"PrivatizationAlgorithm": "OneBitHistogram", "PrivacyParameter": 1,
             "BudgetKeyName": "b"}})";
  docs.algorithmparameters = R"({"OneBitHistogram": {"m": 8}})";
  docs.budgetproperties = R"({"b": {"SessionSeconds": 86400, "SessionAmount": 5}})";
  absl::StatusOr<ConfigBundle> bundle = LoadConfig(docs);
  if (!bundle.ok()) return std::string(bundle.status().message());
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    DaemonOptions options;
    options.seed = seed;
    Daemon daemon = Daemon::OptIn(*bundle, 0, options);
    for (int i = 0; i < 4; ++i) {
      absl::StatusOr<std::optional<PrivatizedRecord>> loud =
          daemon.SubmitEvent("k.loud", Bucket{static_cast<uint32_t>(i)});
      if (!loud.ok() || !loud->has_value()) return "loud event not stored";
      if ((*loud)->epsilon != 1.0 || (*loud)->submission_priority != kNeverSubmitPriority) {
        return absl::StrCat("seed ", seed, ": clamped record carries epsilon ",
                            (*loud)->epsilon, " priority ",
                            (*loud)->submission_priority);
      }
      if (!daemon.SubmitEvent("k.calm", Bucket{static_cast<uint32_t>(i)}).ok()) {
        return "calm event rejected";
      }
    }
    if (!daemon.Advance(2 * kDay).ok()) return "advance failed";
    for (const LossEntry& entry : daemon.ledger().entries()) {
      if (entry.key_name == "k.loud") return absl::StrCat("seed ", seed, ": submitted");
    }
    for (const ReportFile& file : daemon.reports()) {
      for (const ReportEntry& entry : file.entries) {
        if (entry.key_name == "k.loud") return absl::StrCat("seed ", seed, ": reported");
      }
    }
    if (daemon.ledger().size() != 4) {
      return absl::StrCat("seed ", seed, ": ", daemon.ledger().size(),
                          " calm submissions");
    }
  }
  return "";
}

std::string CheckCoin() {
  const std::map<double, double> expected = {
      {0.0, 0.5}, {1.0, 0.26894142136999512}, {2.0, 0.11920292202211755}};
  for (const auto& [epsilon, rate] : expected) {
    absl::StatusOr<proptests::FlipStatistics> stats =
        proptests::CheckFlipStatistics(epsilon, 100000);
    if (!stats.ok()) return std::string(stats.status().message());
    if (std::abs(stats->expected_rate - rate) > 1e-12) {
      return absl::StrCat("epsilon ", epsilon, " coin ", stats->expected_rate);
    }
    if (!stats->passed) return absl::StrCat("epsilon ", epsilon, " z=", stats->z);
  }
  return "";
}

std::string CheckEstimators() {
  constexpr int kN = 100000;
  const std::vector<double> truth = {0.5, 0.3, 0.2, 0, 0, 0, 0, 0};
  std::vector<uint32_t> buckets;
  buckets.reserve(kN);
  for (uint32_t bucket = 0; bucket < truth.size(); ++bucket) {
    buckets.insert(buckets.end(), static_cast<size_t>(truth[bucket] * kN), bucket);
  }
  const BiasedCoin obh_coin = *BiasedCoin::FromEpsilon(1.0);
  const std::vector<ObhPayload> obh =
      PrivatizeObhBatch(buckets, 8, obh_coin, RandomSource(101));
  absl::StatusOr<std::vector<double>> histogram =
      EstimateObh(AggregateObhPayloads("obh", 8, 1.0, obh), obh_coin);
  if (!histogram.ok()) return std::string(histogram.status().message());
  for (size_t i = 0; i < truth.size(); ++i) {
    const double error = std::abs((*histogram)[i] / kN - truth[i]);
    if (error > 0.01) return absl::StrCat("OBH bucket ", i, " error ", error);
  }

  const std::map<std::string, int> counts = {
      {"alpha", 50000}, {"beta", 20000}, {"gamma", 10000}, {"delta", 500}};
  std::vector<std::string> data;
  for (const auto& [word, count] : counts) data.insert(data.end(), count, word);
  const BiasedCoin cms_coin = *BiasedCoin::FromEpsilon(2.0);
  const std::vector<CmsPayload> cms =
      PrivatizeCmsBatch(data, cms_coin, 16, 1024, RandomSource(202));
  const std::vector<std::string> candidates = {"alpha", "beta", "gamma"};
  absl::StatusOr<std::map<std::string, double>> sketch = EstimateCms(
      AggregateCmsPayloads("cms", 16, 1024, 2.0, cms), candidates, cms_coin);
  if (!sketch.ok()) return std::string(sketch.status().message());
  for (const std::string& word : candidates) {
    const double truth_count = counts.at(word);
    const double error = std::abs(sketch->at(word) - truth_count) / truth_count;
    if (error > 0.05) return absl::StrCat("CMS ", word, " relative error ", error);
  }
  return "";
}

std::string CheckRetention() {
  // Report files: 30 days on macOS, 7 on iOS.
  for (const auto& [profile, keep_days] :
       std::vector<std::pair<std::string, int>>{{"macos-10.12.3", 30},
                                                {"ios-10.1.1", 7}}) {
    absl::StatusOr<ConfigBundle> bundle = LoadProfile(profile);
    if (!bundle.ok()) return std::string(bundle.status().message());
    Daemon daemon = Daemon::OptIn(*bundle, 0);
    if (!daemon.SubmitEvent("com.apple.keyboard.Emoji.en_US.EmojiKeyboard", Bucket{1})
             .ok()) {
      return "event rejected";
    }
    if (!daemon.Advance(18 * kHour).ok() || daemon.reports().size() != 1) {
      return absl::StrCat(profile, ": no report emitted");
    }
    // The submitted record is culled at the next 24h tick.
    if (!daemon.Advance(6 * kHour).ok() || !daemon.store().records().empty()) {
      return absl::StrCat(profile, ": submitted record survived culling");
    }
    // Created at 18h; the last daily check before it turns keep_days old.
    if (!daemon.Advance(keep_days * kDay - 6 * kHour).ok() ||
        daemon.reports().size() != 1) {
      return absl::StrCat(profile, ": report deleted early");
    }
    if (!daemon.Advance(kDay).ok() || !daemon.reports().empty()) {
      return absl::StrCat(profile, ": report older than ", keep_days, " days kept");
    }
  }

  // Records: a never-submitted record outlives 14 days only to the next check.
  ConfigDocuments docs;
  docs.keynames = R"({"k.loud": "Loud"})";
  docs.keyproperties = R"({"Loud": {"PrivatizationAlgorithm": "OneBitHistogram",
                                    "PrivacyParameter": 5, "BudgetKeyName": "b"}})";
  docs.algorithmparameters = R"({"OneBitHistogram": {"m": 8}})";
  docs.budgetproperties = R"({"b": {"SessionSeconds": 86400, "SessionAmount": 1}})";
  absl::StatusOr<ConfigBundle> bundle = LoadConfig(docs);
  if (!bundle.ok()) return std::string(bundle.status().message());
  Daemon daemon = Daemon::OptIn(*bundle, 0);
  if (!daemon.SubmitEvent("k.loud", Bucket{0}).ok()) return "loud event rejected";
  if (!daemon.Advance(14 * kDay).ok() || daemon.store().records().size() != 1) {
    return "record deleted at 14 days";
  }
  if (!daemon.Advance(12 * kHour).ok() || !daemon.store().records().empty()) {
    return "record older than 14 days kept";
  }
  return "";
}

std::string CheckDiff() {
  absl::StatusOr<ConfigBundle> old_mac = LoadProfile("macos-10.12.1");
  absl::StatusOr<ConfigBundle> mac = LoadProfile("macos-10.12.3");
  absl::StatusOr<ConfigBundle> beta = LoadProfile("ios-11-beta");
  if (!old_mac.ok() || !mac.ok() || !beta.ok()) return "profile failed to load";
  std::vector<ProfileChange> expected = {
      {ChangeKind::kBudget, "com.apple.differentialprivacy.testBudget",
       "SessionAmount", "1", "4"},
      {ChangeKind::kBudget, "com.apple.health", "present", "no", "yes"},
      {ChangeKind::kBudget, "com.apple.keyboard.NewWords", "SessionAmount", "1", "2"},
      {ChangeKind::kProperties, "HealthDataTypes", "present", "no", "yes"},
      {ChangeKind::kProperties, "LocalWords", "present", "no", "yes"},
      {ChangeKind::kKeyName, "com.apple.health.datatypes", "present", "no", "yes"},
      {ChangeKind::kKeyName, "com.apple.keyboard.LocalWords.en_US", "present", "no",
       "yes"},
      {ChangeKind::kFeature, "SubmissionPriority", "present", "no", "yes"}};
  const ProfileDiff diff = DiffProfiles(*old_mac, *mac);
  if (diff.changes != expected) {
    return absl::StrCat("unexpected rows:\n", FormatProfileDiff(diff));
  }
  const ProfileDiff growth = DiffProfiles(*mac, *beta);
  if (growth.total_daily_loss_delta < 29) {
    return absl::StrCat("bound increase ", growth.total_daily_loss_delta);
  }
  return "";
}

std::string CheckDeterminism() {
  const fs::path root = fs::temp_directory_path() / "dpbudget_acceptance";
  for (const std::string name : {"scenario1.txt", "scenario2.txt"}) {
    std::vector<std::string> transcripts;
    std::vector<std::map<std::string, std::string>> trees;
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = root / absl::StrCat(name, ".", run);
      fs::remove_all(dir);
      fs::create_directories(dir);
      absl::StatusOr<ScenarioOutcome> outcome = RunBundledScenario(name, 2017, dir);
      if (!outcome.ok()) return std::string(outcome.status().message());
      transcripts.push_back(outcome->transcript);
      std::map<std::string, std::string> tree;
      for (const auto& item : fs::recursive_directory_iterator(dir)) {
        if (item.is_regular_file()) {
          tree[fs::relative(item.path(), dir).string()] = ReadFile(item.path());
        }
      }
      if (tree.empty()) return absl::StrCat(name, ": no report files written");
      trees.push_back(std::move(tree));
    }
    if (transcripts[0] != transcripts[1]) return absl::StrCat(name, ": transcripts differ");
    if (trees[0] != trees[1]) return absl::StrCat(name, ": report files differ");
  }
  fs::remove_all(root);
  return "";
}

int Main() {
  const std::vector<Criterion> criteria = {
      {"audit reproduction", 1, CheckAudit},
      {"scenario 1", 1,
       [] { return CheckScenario("scenario1.txt", {1, 1, 1, 1, 1}, 5); }},
      {"scenario 2", 1,
       [] { return CheckScenario("scenario2.txt", {10, 10}, 20); }},
      {"lifetime unboundedness", 10, CheckLifetime},
      {"clamp behavior", 10, CheckClamp},
      {"coin statistics", 5, CheckCoin},
      {"estimator utility", 30, CheckEstimators},
      {"retention and culling", 1, CheckRetention},
      {"profile diff", 1, CheckDiff},
      {"determinism", 5, CheckDeterminism},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string problem = criteria[i].check();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (problem.empty() && seconds >= criteria[i].limit_seconds) {
      problem = absl::StrCat("took ", seconds, " s, limit ",
                             criteria[i].limit_seconds, " s");
    }
    const bool pass = problem.empty();
    if (!pass) ++failures;
    std::printf("%s %2zu %-24s %8.3f s%s%s\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), seconds, pass ? "" : "  ",
                problem.c_str());
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace dpbudget

int main() { return dpbudget::Main(); }
