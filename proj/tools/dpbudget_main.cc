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

// dpbudget: drive the simulated daemon, audit profiles, inspect reports.
//
// Exit codes:
//   0  success
//   1  a scenario assertion failed
//   2  usage error or script parse error
//   3  runtime error (missing snapshot, malformed report dir, bad config)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "dpbudget/auditor.h"
#include "dpbudget/collector.h"
#include "dpbudget/config.h"
#include "dpbudget/daemon.h"
#include "dpbudget/report_io.h"
#include "dpbudget/scenario.h"
#include "json.hpp"

namespace dpbudget {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

constexpr char kSnapshotFile[] = "dprivacyd.snapshot.json";
constexpr char kLogFile[] = "dprivacyd.log";

struct GlobalFlags {
  std::string profile = "macos-10.12.3";
  uint64_t seed = 0;
  std::string workdir = ".";
  bool shift_7h = false;
  bool enable_anomalous_reset = false;
};

int Fail(const absl::Status& status, int code = kExitRuntime) {
  std::cerr << "dpbudget: " << status.message() << "\n";
  return code;
}

absl::StatusOr<std::string> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::Status WriteFile(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

// A loaded daemon plus the number of log lines already persisted.
struct Session {
  std::optional<Daemon> daemon;
  std::string profile;
  size_t persisted_log_lines = 0;
};

absl::StatusOr<Session> LoadSession(const GlobalFlags& flags) {
  const fs::path path = fs::path(flags.workdir) / kSnapshotFile;
  if (!fs::exists(path)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "MissingSnapshot: no ", kSnapshotFile, " in ", flags.workdir,
        " (run optin first)"));
  }
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  json doc = json::parse(*text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("profile") ||
      !doc["profile"].is_string()) {
    return absl::FailedPreconditionError(
        absl::StrCat("MalformedSnapshot: ", path.string()));
  }
  Session session;
  session.profile = doc["profile"].get<std::string>();
  absl::StatusOr<ConfigBundle> bundle = LoadProfile(session.profile);
  if (!bundle.ok()) return bundle.status();
  absl::StatusOr<Daemon> daemon = Daemon::FromSnapshot(doc, *std::move(bundle));
  if (!daemon.ok()) return daemon.status();
  session.persisted_log_lines = daemon->log().size();
  session.daemon.emplace(*std::move(daemon));
  return session;
}

absl::Status SaveSession(const GlobalFlags& flags, Session& session) {
  const fs::path dir(flags.workdir);
  absl::Status status = WriteFile(
      dir / kSnapshotFile, session.daemon->SnapshotJson(session.profile).dump(2) + "\n");
  if (!status.ok()) return status;
  std::ofstream log(dir / kLogFile, std::ios::app);
  const std::vector<std::string>& lines = session.daemon->log();
  for (size_t i = session.persisted_log_lines; i < lines.size(); ++i) {
    std::cout << lines[i] << "\n";
    log << lines[i] << "\n";
  }
  session.persisted_log_lines = lines.size();
  return absl::OkStatus();
}

DaemonOptions MakeDaemonOptions(const GlobalFlags& flags) {
  DaemonOptions options;
  options.seed = flags.seed;
  options.shift_7h = flags.shift_7h;
  options.enable_anomalous_reset = flags.enable_anomalous_reset;
  return options;
}

int CmdOptIn(const GlobalFlags& flags, int64_t start) {
  absl::StatusOr<ConfigBundle> bundle = LoadProfile(flags.profile);
  if (!bundle.ok()) return Fail(bundle.status());
  Session session;
  session.profile = flags.profile;
  session.daemon.emplace(
      Daemon::OptIn(*std::move(bundle), start, MakeDaemonOptions(flags)));
  std::error_code ec;
  fs::remove(fs::path(flags.workdir) / kLogFile, ec);
  if (absl::Status s = SaveSession(flags, session); !s.ok()) return Fail(s);
  return kExitOk;
}

int CmdEvent(const GlobalFlags& flags, const std::string& key,
             const std::string& datum) {
  absl::StatusOr<Session> session = LoadSession(flags);
  if (!session.ok()) return Fail(session.status());
  absl::StatusOr<std::optional<PrivatizedRecord>> record =
      session->daemon->SubmitEvent(key, ParseDatum(datum));
  if (!record.ok()) return Fail(record.status());
  if (record->has_value()) {
    std::cout << absl::StrFormat("record %d key=%s epsilon=%g priority=%d\n",
                                 (*record)->record_id, (*record)->key_name,
                                 (*record)->epsilon,
                                 (*record)->submission_priority);
  } else {
    std::cout << "duplicate word ignored key=" << key << "\n";
  }
  if (absl::Status s = SaveSession(flags, *session); !s.ok()) return Fail(s);
  return kExitOk;
}

int CmdAdvance(const GlobalFlags& flags, const std::string& duration_text) {
  absl::StatusOr<int64_t> duration = ParseDuration(duration_text);
  if (!duration.ok()) return Fail(duration.status(), kExitUsage);
  absl::StatusOr<Session> session = LoadSession(flags);
  if (!session.ok()) return Fail(session.status());
  absl::StatusOr<AdvanceResult> result = session->daemon->Advance(*duration);
  if (!result.ok()) return Fail(result.status());
  for (const ReportFile& file : result->emitted) {
    if (absl::Status s = WriteReport(flags.workdir, file); !s.ok()) return Fail(s);
  }
  for (const ReportFile& file : result->deleted) {
    if (absl::Status s = RemoveReport(flags.workdir, file); !s.ok()) return Fail(s);
  }
  if (absl::Status s = SaveSession(flags, *session); !s.ok()) return Fail(s);
  return kExitOk;
}

int CmdStatus(const GlobalFlags& flags, bool as_json) {
  absl::StatusOr<Session> session = LoadSession(flags);
  if (!session.ok()) return Fail(session.status());
  const Daemon& daemon = *session->daemon;
  size_t unsubmitted = 0;
  for (const PrivatizedRecord& record : daemon.store().records()) {
    unsubmitted += record.submitted ? 0 : 1;
  }
  const RealizedLoss realized = ComputeRealizedLoss(daemon.ledger());
  if (as_json) {
    json budgets = json::object();
    for (const auto& [name, budget] : daemon.store().budgets()) {
      budgets[name] = {{"balance", budget.balance},
                       {"last_update", budget.last_update}};
    }
    json out = {{"profile", session->profile},
                {"now", daemon.now()},
                {"budgets", budgets},
                {"records", daemon.store().records().size()},
                {"unsubmitted", unsubmitted},
                {"submitted", daemon.ledger().size()},
                {"realized_loss", realized.total}};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << absl::StrFormat("profile %s  t=%d  (%.2f days since opt-in)\n",
                               session->profile, daemon.now(),
                               static_cast<double>(daemon.now() - daemon.opt_in_time()) /
                                   kSecondsInOneDay);
  std::cout << absl::StrFormat("%-40s %8s %14s %14s %12s\n", "BudgetKeyName",
                               "balance", "SessionAmount", "SessionSeconds",
                               "last_update");
  for (const auto& [name, budget] : daemon.store().budgets()) {
    const BudgetEntry* entry = daemon.bundle().FindBudget(name);
    std::cout << absl::StrFormat(
        "%-40s %8d %14d %14d %12d\n", name, budget.balance,
        entry == nullptr ? 0 : entry->session_amount,
        entry == nullptr ? 0 : entry->session_seconds, budget.last_update);
  }
  std::cout << absl::StrFormat(
      "records %d (unsubmitted %d)  submitted %d  realized_loss %g\n",
      daemon.store().records().size(), unsubmitted, daemon.ledger().size(),
      realized.total);
  return kExitOk;
}

int CmdAudit(const GlobalFlags& flags, std::vector<std::string> scope,
             std::optional<int64_t> days, bool as_json) {
  absl::StatusOr<ConfigBundle> bundle = LoadProfile(flags.profile);
  if (!bundle.ok()) return Fail(bundle.status());
  if (scope.empty()) scope.push_back("four-apps");
  absl::StatusOr<std::vector<std::string>> resolved = ResolveScope(*bundle, scope);
  if (!resolved.ok()) return Fail(resolved.status(), kExitUsage);
  scope = *std::move(resolved);
  absl::StatusOr<LossReport> report = SessionLossBound(*bundle, scope);
  if (!report.ok()) return Fail(report.status(), kExitUsage);
  std::optional<double> lifetime;
  if (days.has_value()) {
    absl::StatusOr<double> bound = LifetimeLossBound(*bundle, scope, *days);
    if (!bound.ok()) return Fail(bound.status(), kExitUsage);
    lifetime = *bound;
  }
  if (as_json) {
    json out = LossReportToJson(*report);
    out["profile"] = bundle->profile_name();
    if (lifetime.has_value()) {
      out["days"] = *days;
      out["lifetime_loss"] = *lifetime;
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << "profile " << bundle->profile_name() << "\n"
            << FormatLossReport(*report);
  if (lifetime.has_value()) {
    std::cout << absl::StrFormat("lifetime loss over %d days: %g\n", *days,
                                 *lifetime);
  }
  return kExitOk;
}

int CmdDiff(const std::string& from, const std::string& to, bool as_json) {
  absl::StatusOr<ConfigBundle> before = LoadProfile(from);
  if (!before.ok()) return Fail(before.status());
  absl::StatusOr<ConfigBundle> after = LoadProfile(to);
  if (!after.ok()) return Fail(after.status());
  const ProfileDiff diff = DiffProfiles(*before, *after);
  if (as_json) {
    std::cout << ProfileDiffToJson(diff).dump(2) << "\n";
  } else {
    std::cout << FormatProfileDiff(diff);
  }
  return kExitOk;
}

int CmdReports(const GlobalFlags& flags) {
  absl::StatusOr<ReportDirectoryListing> listing =
      ReadReportDirectories(flags.workdir);
  if (!listing.ok()) return Fail(listing.status());
  // Ages are measured against the daemon clock when a snapshot exists,
  // otherwise against the newest file.
  std::optional<UnixSeconds> now;
  if (absl::StatusOr<Session> session = LoadSession(flags); session.ok()) {
    now = session->daemon->now();
  }
  if (!now.has_value()) {
    UnixSeconds newest = 0;
    for (const ReportFile& file : listing->files) {
      newest = std::max(newest, file.created_at);
    }
    now = newest;
  }
  if (listing->files.empty()) std::cout << "no reports\n";
  for (const ReportFile& file : listing->files) {
    std::cout << absl::StrFormat("%-70s age=%.2fd entries=%d\n", file.path,
                                 static_cast<double>(*now - file.created_at) /
                                     kSecondsInOneDay,
                                 file.entries.size());
  }
  for (const std::string& path : listing->unreadable) {
    std::cout << path << " unreadable\n";
  }
  return kExitOk;
}

int CmdEstimate(const GlobalFlags& flags,
                const std::vector<std::string>& candidates) {
  absl::StatusOr<ReportDirectoryListing> listing =
      ReadReportDirectories(flags.workdir);
  if (!listing.ok()) return Fail(listing.status());
  Aggregates aggregates = Ingest(listing->files);
  json out = EstimatesToJson(aggregates, candidates);
  out["unreadable_files"] = listing->unreadable;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int CmdRun(const GlobalFlags& flags, const std::string& script_path,
           int64_t start, bool write_reports) {
  absl::StatusOr<std::string> text = ReadFile(script_path);
  if (!text.ok()) return Fail(text.status(), kExitUsage);
  absl::StatusOr<Scenario> scenario = ParseScenario(*text);
  if (!scenario.ok()) return Fail(scenario.status(), kExitUsage);
  absl::StatusOr<ConfigBundle> bundle = LoadProfile(flags.profile);
  if (!bundle.ok()) return Fail(bundle.status());
  ScenarioOptions options;
  options.seed = flags.seed;
  options.shift_7h = flags.shift_7h;
  options.enable_anomalous_reset = flags.enable_anomalous_reset;
  options.start = start;
  if (write_reports) options.workdir = fs::path(flags.workdir);
  absl::StatusOr<ScenarioOutcome> outcome =
      RunScenario(*scenario, *bundle, options);
  if (!outcome.ok()) {
    const bool parse = absl::StrContains(outcome.status().message(),
                                         "ScriptParseError");
    return Fail(outcome.status(), parse ? kExitUsage : kExitRuntime);
  }
  std::cout << outcome->transcript;
  if (!outcome->passed()) {
    std::cerr << "AssertionFailed: " << outcome->failures.size()
              << " assertion(s) failed\n";
    return kExitAssertion;
  }
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Simulated on-device privacy budget daemon and auditor"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--profile", flags.profile,
                 absl::StrCat("Bundled profile (",
                              absl::StrJoin(BundledProfileNames(), ", "),
                              ") or a config directory"));
  app.add_option("--seed", flags.seed, "Random seed");
  app.add_option("--workdir", flags.workdir,
                 "Directory holding the snapshot, log and report folders");
  app.add_flag("--shift-7h", flags.shift_7h,
               "Shift report file names forward by 7 hours");
  app.add_flag("--enable-anomalous-reset", flags.enable_anomalous_reset,
               "Apply the anomalous budget reset during budget maintenance");

  int result = kExitOk;
  int64_t start = 0;

  CLI::App* optin = app.add_subcommand("optin", "Opt in and create a fresh snapshot");
  optin->add_option("--start", start, "Virtual opt-in time in unix seconds");
  optin->callback([&] { result = CmdOptIn(flags, start); });

  std::string key, datum;
  CLI::App* event = app.add_subcommand("event", "Privatize and store one event");
  event->add_option("key", key, "KeyName")->required();
  event->add_option("datum", datum, "Word, or #<bucket> for a histogram bucket")
      ->required();
  event->callback([&] { result = CmdEvent(flags, key, datum); });

  std::string duration;
  CLI::App* advance = app.add_subcommand("advance", "Advance the virtual clock");
  advance->add_option("duration", duration, "e.g. 90, 30m, 18h, 19d, 1w")
      ->required();
  advance->callback([&] { result = CmdAdvance(flags, duration); });

  bool as_json = false;
  CLI::App* status = app.add_subcommand("status", "Print the budget table");
  status->add_flag("--json", as_json, "Emit JSON");
  status->callback([&] { result = CmdStatus(flags, as_json); });

  std::vector<std::string> scope;
  std::optional<int64_t> days;
  CLI::App* audit = app.add_subcommand("audit", "Daily privacy loss bound");
  audit->add_option("--scope", scope,
                    "four-apps (default), all, or budget key names");
  audit->add_option("--days", days, "Also report the bound over N days");
  audit->add_flag("--json", as_json, "Emit JSON");
  audit->callback([&] { result = CmdAudit(flags, scope, days, as_json); });

  std::string from, to;
  CLI::App* diff = app.add_subcommand("diff", "Compare two profiles");
  diff->add_option("from", from, "Older profile")->required();
  diff->add_option("to", to, "Newer profile")->required();
  diff->add_flag("--json", as_json, "Emit JSON");
  diff->callback([&] { result = CmdDiff(from, to, as_json); });

  CLI::App* reports = app.add_subcommand("reports", "List report files with ages");
  reports->callback([&] { result = CmdReports(flags); });

  std::vector<std::string> candidates;
  CLI::App* estimate =
      app.add_subcommand("estimate", "Aggregate report files and debias counts");
  estimate->add_option("--candidates", candidates, "Words to score in sketches");
  estimate->callback([&] { result = CmdEstimate(flags, candidates); });

  std::string script;
  bool write_reports = false;
  CLI::App* run = app.add_subcommand("run", "Run a scenario script");
  run->add_option("script", script, "Scenario file")->required();
  run->add_option("--start", start, "Virtual opt-in time in unix seconds");
  run->add_flag("--write-reports", write_reports,
                "Write emitted report files under --workdir");
  run->callback([&] { result = CmdRun(flags, script, start, write_reports); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  return result;
}

}  // namespace
}  // namespace dpbudget

int main(int argc, char** argv) { return dpbudget::Main(argc, argv); }
