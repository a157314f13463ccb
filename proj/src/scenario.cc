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

#include "dpbudget/scenario.h"

#include <cstdlib>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "dpbudget/auditor.h"

namespace dpbudget {
namespace {

constexpr size_t kMaxExpandedSteps = 1'000'000;

absl::Status ParseError(int line, absl::string_view detail) {
  return absl::InvalidArgumentError(
      absl::StrCat("ScriptParseError: line ", line, ": ", detail));
}

bool IsOperator(absl::string_view token) {
  return token == "==" || token == "!=" || token == "<=" || token == ">=" ||
         token == "<" || token == ">";
}

bool Compare(absl::string_view actual, absl::string_view op,
             absl::string_view expected) {
  double a = 0, e = 0;
  if (absl::SimpleAtod(actual, &a) && absl::SimpleAtod(expected, &e)) {
    if (op == "==") return a == e;
    if (op == "!=") return a != e;
    if (op == "<=") return a <= e;
    if (op == ">=") return a >= e;
    if (op == "<") return a < e;
    if (op == ">") return a > e;
  }
  if (op == "==") return actual == expected;
  if (op == "!=") return actual != expected;
  return false;
}

std::string Num(double value) { return absl::StrFormat("%g", value); }

}  // namespace

absl::StatusOr<int64_t> ParseDuration(absl::string_view text) {
  text = absl::StripAsciiWhitespace(text);
  if (text.empty()) return absl::InvalidArgumentError("empty duration");
  int64_t unit = 1;
  switch (text.back()) {
    case 's':
      unit = 1;
      break;
    case 'm':
      unit = 60;
      break;
    case 'h':
      unit = 3600;
      break;
    case 'd':
      unit = kSecondsInOneDay;
      break;
    case 'w':
      unit = 7 * kSecondsInOneDay;
      break;
    default:
      unit = 0;
  }
  absl::string_view digits = unit == 0 ? text : text.substr(0, text.size() - 1);
  if (unit == 0) unit = 1;
  int64_t value = 0;
  if (!absl::SimpleAtoi(digits, &value) || value < 0) {
    return absl::InvalidArgumentError(absl::StrCat("bad duration '", text, "'"));
  }
  return value * unit;
}

EventDatum ParseDatum(absl::string_view text) {
  uint32_t bucket = 0;
  if (absl::ConsumePrefix(&text, "#") && absl::SimpleAtoi(text, &bucket)) {
    return Bucket{bucket};
  }
  return std::string(text);
}

absl::StatusOr<Scenario> ParseScenario(absl::string_view text) {
  struct Frame {
    int64_t count;
    int line;
    std::vector<ScenarioStep> steps;
  };
  std::vector<Frame> stack;
  stack.push_back({1, 0, {}});

  int line_number = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_number;
    absl::string_view line = absl::StripAsciiWhitespace(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> tokens =
        absl::StrSplit(line, absl::ByAnyChar(" \t"), absl::SkipEmpty());
    const std::string& verb = tokens.front();

    ScenarioStep step;
    step.line = line_number;
    if (verb == "optin") {
      if (tokens.size() != 1) return ParseError(line_number, "optin takes no arguments");
      step.kind = ScenarioStep::Kind::kOptIn;
    } else if (verb == "event") {
      if (tokens.size() < 3) {
        return ParseError(line_number, "usage: event <KeyName> <datum>");
      }
      step.kind = ScenarioStep::Kind::kEvent;
      step.key_name = tokens[1];
      // The datum is the remainder of the line, inner spaces included.
      absl::string_view rest = line.substr(line.find(tokens[1]) + tokens[1].size());
      step.datum = ParseDatum(absl::StripAsciiWhitespace(rest));
    } else if (verb == "advance") {
      if (tokens.size() != 2) return ParseError(line_number, "usage: advance <duration>");
      absl::StatusOr<int64_t> duration = ParseDuration(tokens[1]);
      if (!duration.ok()) return ParseError(line_number, duration.status().message());
      step.kind = ScenarioStep::Kind::kAdvance;
      step.duration = *duration;
    } else if (verb == "assert") {
      if (tokens.size() < 4 || !IsOperator(tokens[tokens.size() - 2])) {
        return ParseError(line_number, "usage: assert <query...> <op> <value>");
      }
      step.kind = ScenarioStep::Kind::kAssert;
      step.query.assign(tokens.begin() + 1, tokens.end() - 2);
      step.op = tokens[tokens.size() - 2];
      step.expected = tokens.back();
    } else if (verb == "repeat") {
      int64_t count = 0;
      if (tokens.size() != 2 || !absl::SimpleAtoi(tokens[1], &count) || count < 0) {
        return ParseError(line_number, "usage: repeat <n>");
      }
      stack.push_back({count, line_number, {}});
      continue;
    } else if (verb == "end") {
      if (stack.size() == 1) return ParseError(line_number, "'end' without 'repeat'");
      Frame frame = std::move(stack.back());
      stack.pop_back();
      std::vector<ScenarioStep>& parent = stack.back().steps;
      if (parent.size() + frame.steps.size() * static_cast<size_t>(frame.count) >
          kMaxExpandedSteps) {
        return ParseError(line_number, "scenario expands to too many steps");
      }
      for (int64_t i = 0; i < frame.count; ++i) {
        parent.insert(parent.end(), frame.steps.begin(), frame.steps.end());
      }
      continue;
    } else {
      return ParseError(line_number, absl::StrCat("unknown step '", verb, "'"));
    }
    stack.back().steps.push_back(std::move(step));
  }
  if (stack.size() != 1) {
    return ParseError(stack.back().line, "'repeat' without 'end'");
  }

  Scenario scenario;
  scenario.steps = std::move(stack.front().steps);
  if (scenario.steps.empty() ||
      scenario.steps.front().kind != ScenarioStep::Kind::kOptIn) {
    return ParseError(scenario.steps.empty() ? line_number : scenario.steps.front().line,
                      "a scenario must begin with optin");
  }
  for (size_t i = 1; i < scenario.steps.size(); ++i) {
    if (scenario.steps[i].kind == ScenarioStep::Kind::kOptIn) {
      return ParseError(scenario.steps[i].line, "optin may appear only once");
    }
  }
  return scenario;
}

absl::StatusOr<std::string> EvaluateQuery(const Daemon& daemon,
                                          std::span<const std::string> query) {
  if (query.empty()) return absl::InvalidArgumentError("empty query");
  const std::string& name = query.front();
  auto no_args = [&]() -> absl::Status {
    if (query.size() != 1) {
      return absl::InvalidArgumentError(absl::StrCat(name, " takes no arguments"));
    }
    return absl::OkStatus();
  };
  if (name == "balance") {
    if (query.size() != 2) {
      return absl::InvalidArgumentError("usage: balance <budget key>");
    }
    absl::StatusOr<std::vector<std::string>> scope =
        ResolveScope(daemon.bundle(), query.subspan(1, 1));
    if (!scope.ok()) return scope.status();
    if (scope->size() != 1) {
      return absl::InvalidArgumentError("balance needs exactly one budget key");
    }
    const BudgetRecord* budget = daemon.store().FindBudget(scope->front());
    if (budget == nullptr) {
      return absl::NotFoundError(absl::StrCat("no budget row ", scope->front()));
    }
    return absl::StrCat(budget->balance);
  }
  if (absl::Status status = no_args(); !status.ok()) return status;
  if (name == "realized_loss") {
    return Num(ComputeRealizedLoss(daemon.ledger()).total);
  }
  if (name == "records") return absl::StrCat(daemon.store().records().size());
  if (name == "unsubmitted") {
    size_t n = 0;
    for (const PrivatizedRecord& record : daemon.store().records()) {
      n += record.submitted ? 0 : 1;
    }
    return absl::StrCat(n);
  }
  if (name == "submitted") return absl::StrCat(daemon.ledger().size());
  if (name == "reports") return absl::StrCat(daemon.report_sizes().size());
  if (name == "report_sizes") {
    return daemon.report_sizes().empty()
               ? std::string("none")
               : absl::StrJoin(daemon.report_sizes(), ",");
  }
  if (name == "now") return absl::StrCat(daemon.now());
  return absl::InvalidArgumentError(absl::StrCat("unknown query '", name, "'"));
}

absl::StatusOr<ScenarioOutcome> RunScenario(const Scenario& scenario,
                                            const ConfigBundle& bundle,
                                            const ScenarioOptions& options) {
  ScenarioOutcome outcome;
  std::string& out = outcome.transcript;
  std::optional<Daemon>& daemon = outcome.daemon;
  size_t logged = 0;
  auto flush_log = [&]() {
    for (; logged < daemon->log().size(); ++logged) {
      absl::StrAppend(&out, daemon->log()[logged], "\n");
    }
  };

  for (const ScenarioStep& step : scenario.steps) {
    switch (step.kind) {
      case ScenarioStep::Kind::kOptIn: {
        DaemonOptions daemon_options;
        daemon_options.seed = options.seed;
        daemon_options.shift_7h = options.shift_7h;
        daemon_options.enable_anomalous_reset = options.enable_anomalous_reset;
        daemon = Daemon::OptIn(bundle, options.start, daemon_options);
        break;
      }
      case ScenarioStep::Kind::kEvent: {
        absl::StatusOr<std::optional<PrivatizedRecord>> record =
            daemon->SubmitEvent(step.key_name, step.datum);
        if (!record.ok()) {
          return absl::Status(record.status().code(),
                              absl::StrCat("line ", step.line, ": ",
                                           record.status().message()));
        }
        break;
      }
      case ScenarioStep::Kind::kAdvance: {
        absl::StatusOr<AdvanceResult> result = daemon->Advance(step.duration);
        if (!result.ok()) return result.status();
        if (options.workdir.has_value()) {
          for (const ReportFile& file : result->emitted) {
            if (absl::Status s = WriteReport(*options.workdir, file); !s.ok()) return s;
          }
          for (const ReportFile& file : result->deleted) {
            if (absl::Status s = RemoveReport(*options.workdir, file); !s.ok()) return s;
          }
        }
        break;
      }
      case ScenarioStep::Kind::kAssert: {
        flush_log();
        absl::StatusOr<std::string> actual = EvaluateQuery(*daemon, step.query);
        if (!actual.ok()) {
          return absl::InvalidArgumentError(absl::StrCat(
              "ScriptParseError: line ", step.line, ": ", actual.status().message()));
        }
        const std::string description =
            absl::StrCat(absl::StrJoin(step.query, " "), " ", step.op, " ",
                         step.expected);
        if (Compare(*actual, step.op, step.expected)) {
          absl::StrAppend(&out, "assert ", description, ": ok\n");
        } else {
          const std::string failure = absl::StrCat(
              "line ", step.line, ": assert ", description, ": FAILED (actual ",
              *actual, ")");
          absl::StrAppend(&out, failure, "\n");
          outcome.failures.push_back(failure);
        }
        break;
      }
    }
  }
  flush_log();

  absl::StrAppend(&out, "final t=", daemon->now(),
                  " realized_loss=", Num(ComputeRealizedLoss(daemon->ledger()).total),
                  " submitted=", daemon->ledger().size(),
                  " reports=", daemon->report_sizes().size(), "\n");
  for (const auto& [name, budget] : daemon->store().budgets()) {
    absl::StrAppend(&out, "final balance ", name, "=", budget.balance, "\n");
  }
  return outcome;
}

}  // namespace dpbudget
