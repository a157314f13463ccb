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

#include "dpbudget/config.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"

namespace dpbudget {
namespace {

using json = nlohmann::json;

absl::Status Malformed(absl::string_view document, absl::string_view detail) {
  return absl::InvalidArgumentError(
      absl::StrCat("MalformedDocument: ", document, ": ", detail));
}

// Parses an object document, rejecting duplicate top-level keys.
absl::StatusOr<json> ParseObject(absl::string_view name, const std::string& text) {
  std::set<std::string> top_level_keys;
  std::string duplicate;
  json::parser_callback_t callback = [&](int depth, json::parse_event_t event,
                                         json& parsed) {
    if (event == json::parse_event_t::key && depth == 1 &&
        !top_level_keys.insert(parsed.get<std::string>()).second &&
        duplicate.empty()) {
      duplicate = parsed.get<std::string>();
    }
    return true;
  };
  json doc = json::parse(text, callback, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return Malformed(name, "not valid JSON");
  if (!doc.is_object()) return Malformed(name, "top level must be an object");
  if (!duplicate.empty()) {
    return Malformed(name, absl::StrCat("duplicate key '", duplicate, "'"));
  }
  return doc;
}

absl::StatusOr<int64_t> PositiveInteger(const json& object, absl::string_view field,
                                        absl::string_view document,
                                        absl::string_view owner) {
  auto it = object.find(field);
  if (it == object.end() || !it->is_number_integer()) {
    return Malformed(document,
                     absl::StrCat(owner, ": '", field, "' must be an integer"));
  }
  int64_t value = it->get<int64_t>();
  if (value <= 0) {
    return Malformed(document,
                     absl::StrCat(owner, ": '", field, "' must be positive"));
  }
  return value;
}

std::string ReadFile(const std::filesystem::path& path, bool* ok) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    *ok = false;
    return {};
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  *ok = true;
  return buffer.str();
}

std::filesystem::path ProfileRoot() {
  if (const char* env = std::getenv("DPBUDGET_PROFILE_DIR"); env && *env) {
    return env;
  }
  return DPBUDGET_PROFILE_DIR;
}

}  // namespace

absl::string_view AlgorithmName(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kOneBitHistogram:
      return "OneBitHistogram";
    case Algorithm::kCountMedianSketch:
      return "CountMedianSketch";
  }
  return "unknown";
}

absl::StatusOr<Algorithm> ParseAlgorithm(absl::string_view name) {
  if (name == "OneBitHistogram") return Algorithm::kOneBitHistogram;
  if (name == "CountMedianSketch") return Algorithm::kCountMedianSketch;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown PrivatizationAlgorithm '", name, "'"));
}

bool ConfigBundle::has_submission_priority() const {
  return std::any_of(properties_.begin(), properties_.end(), [](const auto& p) {
    return p.second.submission_priority.has_value();
  });
}

const BudgetEntry* ConfigBundle::FindBudget(absl::string_view name) const {
  auto it = budgets_.find(std::string(name));
  return it == budgets_.end() ? nullptr : &it->second;
}

const PropertiesEntry* ConfigBundle::FindProperties(absl::string_view name) const {
  auto it = properties_.find(std::string(name));
  return it == properties_.end() ? nullptr : &it->second;
}

absl::StatusOr<ResolvedKey> ConfigBundle::Resolve(absl::string_view key_name) const {
  auto key_it = key_names_.find(std::string(key_name));
  if (key_it == key_names_.end()) {
    return absl::NotFoundError(absl::StrCat("UnknownKeyName: ", key_name));
  }
  // LoadConfig guarantees both lookups succeed.
  const PropertiesEntry& props = properties_.at(key_it->second.properties_name);
  const BudgetEntry& budget = budgets_.at(props.budget_key_name);

  absl::StatusOr<ClampResult> clamp = ClampEpsilon(props.privacy_parameter, *this);
  if (!clamp.ok()) return clamp.status();

  ResolvedKey resolved;
  resolved.key_name = key_it->first;
  resolved.properties_name = props.properties_name;
  resolved.algorithm = props.algorithm;
  resolved.configured_epsilon = props.privacy_parameter;
  resolved.effective_epsilon = clamp->effective_epsilon;
  resolved.submission_priority =
      clamp->submission_priority == kNeverSubmitPriority
          ? kNeverSubmitPriority
          : props.submission_priority.value_or(kDefaultPriority);
  resolved.budget_key_name = props.budget_key_name;
  resolved.session_amount = budget.session_amount;
  resolved.session_amount_effective = EffectiveRecordCap(budget.session_amount);
  resolved.session_seconds = budget.session_seconds;
  resolved.params = algorithm_params_.at(props.algorithm);
  return resolved;
}

absl::StatusOr<ClampResult> ClampEpsilon(double requested,
                                         const ConfigBundle& bundle) {
  if (!(requested > 0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("NonPositiveEpsilon: ", requested));
  }
  if (requested > bundle.epsilon_max()) {
    return ClampResult{kClampedEpsilon, kNeverSubmitPriority};
  }
  return ClampResult{requested, kDefaultPriority};
}

int64_t EffectiveRecordCap(int64_t session_amount) {
  return std::min<int64_t>(session_amount, kRecordCap);
}

absl::StatusOr<ConfigBundle> LoadConfig(const ConfigDocuments& documents) {
  ConfigBundle bundle;

  if (!documents.profile.empty()) {
    absl::StatusOr<json> profile = ParseObject("profile", documents.profile);
    if (!profile.ok()) return profile.status();
    bundle.profile_name_ = profile->value("name", "");
    bundle.platform_ = profile->value("platform", "macos");
    if (profile->contains("report_retention_days")) {
      absl::StatusOr<int64_t> days = PositiveInteger(
          *profile, "report_retention_days", "profile", "profile");
      if (!days.ok()) return days.status();
      bundle.report_retention_seconds_ = *days * kSecondsInOneDay;
    }
  }

  absl::StatusOr<json> budgets =
      ParseObject("budgetproperties", documents.budgetproperties);
  if (!budgets.ok()) return budgets.status();
  for (const auto& [name, value] : budgets->items()) {
    if (!value.is_object()) {
      return Malformed("budgetproperties", absl::StrCat(name, ": not an object"));
    }
    BudgetEntry entry;
    entry.budget_key_name = name;
    absl::StatusOr<int64_t> seconds =
        PositiveInteger(value, "SessionSeconds", "budgetproperties", name);
    if (!seconds.ok()) return seconds.status();
    absl::StatusOr<int64_t> amount =
        PositiveInteger(value, "SessionAmount", "budgetproperties", name);
    if (!amount.ok()) return amount.status();
    entry.session_seconds = *seconds;
    entry.session_amount = *amount;
    bundle.budgets_.emplace(name, std::move(entry));
  }

  bundle.algorithm_params_[Algorithm::kOneBitHistogram] =
      AlgorithmParams{Algorithm::kOneBitHistogram, 1024, 1};
  bundle.algorithm_params_[Algorithm::kCountMedianSketch] =
      AlgorithmParams{Algorithm::kCountMedianSketch, 1024, 16};
  absl::StatusOr<json> algorithms =
      ParseObject("algorithmparameters", documents.algorithmparameters);
  if (!algorithms.ok()) return algorithms.status();
  for (const auto& [name, value] : algorithms->items()) {
    absl::StatusOr<Algorithm> algorithm = ParseAlgorithm(name);
    if (!algorithm.ok()) {
      return Malformed("algorithmparameters", algorithm.status().message());
    }
    if (!value.is_object()) {
      return Malformed("algorithmparameters", absl::StrCat(name, ": not an object"));
    }
    AlgorithmParams& params = bundle.algorithm_params_[*algorithm];
    if (value.contains("m")) {
      absl::StatusOr<int64_t> m =
          PositiveInteger(value, "m", "algorithmparameters", name);
      if (!m.ok()) return m.status();
      if (*m < 2 || *m > (int64_t{1} << 24)) {
        return Malformed("algorithmparameters",
                         absl::StrCat(name, ": m must be in [2, 2^24]"));
      }
      params.m = static_cast<uint32_t>(*m);
    }
    if (value.contains("k")) {
      absl::StatusOr<int64_t> k =
          PositiveInteger(value, "k", "algorithmparameters", name);
      if (!k.ok()) return k.status();
      if (*k > 4096) {
        return Malformed("algorithmparameters",
                         absl::StrCat(name, ": k must be at most 4096"));
      }
      params.k = static_cast<uint32_t>(*k);
    }
  }
  bundle.algorithm_params_[Algorithm::kOneBitHistogram].k = 1;

  absl::StatusOr<json> properties =
      ParseObject("keyproperties", documents.keyproperties);
  if (!properties.ok()) return properties.status();
  for (const auto& [name, value] : properties->items()) {
    if (!value.is_object()) {
      return Malformed("keyproperties", absl::StrCat(name, ": not an object"));
    }
    PropertiesEntry entry;
    entry.properties_name = name;

    auto algorithm_it = value.find("PrivatizationAlgorithm");
    if (algorithm_it == value.end() || !algorithm_it->is_string()) {
      return Malformed("keyproperties",
                       absl::StrCat(name, ": missing PrivatizationAlgorithm"));
    }
    absl::StatusOr<Algorithm> algorithm =
        ParseAlgorithm(algorithm_it->get<std::string>());
    if (!algorithm.ok()) {
      return Malformed("keyproperties", algorithm.status().message());
    }
    entry.algorithm = *algorithm;

    auto epsilon_it = value.find("PrivacyParameter");
    if (epsilon_it == value.end() || !epsilon_it->is_number()) {
      return Malformed("keyproperties",
                       absl::StrCat(name, ": missing PrivacyParameter"));
    }
    entry.privacy_parameter = epsilon_it->get<double>();
    if (!(entry.privacy_parameter > 0)) {
      return Malformed("keyproperties",
                       absl::StrCat(name, ": PrivacyParameter must be positive"));
    }

    auto budget_it = value.find("BudgetKeyName");
    if (budget_it == value.end() || !budget_it->is_string()) {
      return Malformed("keyproperties", absl::StrCat(name, ": missing BudgetKeyName"));
    }
    entry.budget_key_name = budget_it->get<std::string>();
    if (bundle.FindBudget(entry.budget_key_name) == nullptr) {
      return absl::InvalidArgumentError(
          absl::StrCat("MissingBudget: properties '", name,
                       "' references undefined BudgetKeyName '",
                       entry.budget_key_name, "'"));
    }

    if (auto priority_it = value.find("SubmissionPriority");
        priority_it != value.end()) {
      if (!priority_it->is_number_integer()) {
        return Malformed("keyproperties",
                         absl::StrCat(name, ": SubmissionPriority must be an integer"));
      }
      entry.submission_priority = priority_it->get<int>();
    }
    bundle.properties_.emplace(name, std::move(entry));
  }

  absl::StatusOr<json> keynames = ParseObject("keynames", documents.keynames);
  if (!keynames.ok()) return keynames.status();
  for (const auto& [name, value] : keynames->items()) {
    if (!value.is_string()) {
      return Malformed("keynames", absl::StrCat(name, ": value must be a string"));
    }
    std::string properties_name = value.get<std::string>();
    if (bundle.FindProperties(properties_name) == nullptr) {
      return absl::InvalidArgumentError(
          absl::StrCat("MissingProperties: KeyName '", name,
                       "' references undefined PropertiesName '",
                       properties_name, "'"));
    }
    bundle.key_names_.emplace(name, KeyNameEntry{name, properties_name});
  }

  return bundle;
}

absl::StatusOr<ConfigDocuments> ReadConfigDirectory(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path root(directory);
  if (!fs::is_directory(root)) {
    return absl::NotFoundError(
        absl::StrCat("config directory not found: ", directory));
  }
  ConfigDocuments documents;
  struct Slot {
    const char* file;
    std::string* text;
  };
  for (const Slot& slot : {Slot{"keynames.json", &documents.keynames},
                           Slot{"keyproperties.json", &documents.keyproperties},
                           Slot{"algorithmparameters.json",
                                &documents.algorithmparameters},
                           Slot{"budgetproperties.json",
                                &documents.budgetproperties}}) {
    bool ok = false;
    *slot.text = ReadFile(root / slot.file, &ok);
    if (!ok) {
      return absl::NotFoundError(
          absl::StrCat("MalformedDocument: missing ", (root / slot.file).string()));
    }
  }
  bool ok = false;
  documents.profile = ReadFile(root / "profile.json", &ok);
  return documents;
}

absl::StatusOr<ConfigBundle> LoadProfile(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  fs::path directory(name_or_path);
  const bool is_path = fs::is_directory(directory);
  if (!is_path) directory = ProfileRoot() / name_or_path;
  absl::StatusOr<ConfigDocuments> documents = ReadConfigDirectory(directory.string());
  if (!documents.ok()) {
    return absl::NotFoundError(absl::StrCat("unknown profile '", name_or_path,
                                            "': ", documents.status().message()));
  }
  absl::StatusOr<ConfigBundle> bundle = LoadConfig(*documents);
  if (!bundle.ok()) return bundle.status();
  if (bundle->profile_name_.empty()) {
    bundle->profile_name_ = directory.filename().string();
  }
  return bundle;
}

std::vector<std::string> BundledProfileNames() {
  std::vector<std::string> names;
  std::error_code error;
  for (const auto& entry :
       std::filesystem::directory_iterator(ProfileRoot(), error)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace dpbudget
