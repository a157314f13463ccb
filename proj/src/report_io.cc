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

#include "dpbudget/report_io.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/time/time.h"
#include "json.hpp"

namespace dpbudget {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::array<FolderClass, 2> kFolders = {FolderClass::kDiagnostic,
                                                 FolderClass::kParsec};

absl::string_view FolderExtension(FolderClass folder) {
  return folder == FolderClass::kDiagnostic ? ".dpsub.json" : ".json.anon";
}

absl::Status MalformedReport(absl::string_view path, absl::string_view detail) {
  return absl::InvalidArgumentError(
      absl::StrCat("malformed report ", path, ": ", detail));
}

}  // namespace

absl::string_view FolderClassName(FolderClass folder) {
  return folder == FolderClass::kDiagnostic ? "diagnostic" : "parsec";
}

absl::string_view FolderDirectory(FolderClass folder) {
  return folder == FolderClass::kDiagnostic ? "DiagnosticReports"
                                            : "DifferentialPrivacy/Reports";
}

FolderClass FolderForProperties(absl::string_view properties_name) {
  if (properties_name == "Search" || properties_name == "DeepLinks") {
    return FolderClass::kParsec;
  }
  return FolderClass::kDiagnostic;
}

std::string ReportPath(FolderClass folder, UnixSeconds now, bool shift_7h,
                       const std::set<std::string>& taken) {
  const UnixSeconds stamp = shift_7h ? now + kSecondsIn7Hours : now;
  const std::string base = absl::StrCat(
      FolderDirectory(folder), "/DifferentialPrivacy-",
      absl::FormatTime("%Y-%m-%d-%H%M%S", absl::FromUnixSeconds(stamp),
                       absl::UTCTimeZone()));
  std::string candidate = absl::StrCat(base, FolderExtension(folder));
  for (int suffix = 1; taken.contains(candidate); ++suffix) {
    candidate = absl::StrCat(base, "_", suffix, FolderExtension(folder));
  }
  return candidate;
}

absl::StatusOr<std::vector<ReportFile>> RenderReport(
    std::span<const PrivatizedRecord> records, const ConfigBundle& bundle,
    UnixSeconds now, bool shift_7h, const std::set<std::string>& taken) {
  if (records.empty()) return absl::InvalidArgumentError("EmptySelection");

  std::array<ReportFile, 2> files;
  for (const PrivatizedRecord& record : records) {
    absl::StatusOr<ResolvedKey> resolved = bundle.Resolve(record.key_name);
    if (!resolved.ok()) return resolved.status();
    ReportEntry entry;
    entry.key_name = record.key_name;
    entry.algorithm = record.algorithm;
    entry.epsilon = record.epsilon;
    entry.m = static_cast<uint32_t>(PayloadBits(record.payload).size());
    entry.k = resolved->params.k;
    if (const auto* cms = std::get_if<CmsPayload>(&record.payload)) {
      entry.row = cms->row;
    }
    entry.payload = EncodeBits(PayloadBits(record.payload));
    const FolderClass folder = FolderForProperties(resolved->properties_name);
    files[static_cast<size_t>(folder)].entries.push_back(std::move(entry));
  }

  std::vector<ReportFile> out;
  for (FolderClass folder : kFolders) {
    ReportFile& file = files[static_cast<size_t>(folder)];
    if (file.entries.empty()) continue;
    file.folder_class = folder;
    file.created_at = now;
    file.path = ReportPath(folder, now, shift_7h, taken);
    out.push_back(std::move(file));
  }
  return out;
}

std::string SerializeReport(const ReportFile& file) {
  json records = json::array();
  for (const ReportEntry& entry : file.entries) {
    json item = {{"key", entry.key_name},
                 {"algorithm", AlgorithmName(entry.algorithm)},
                 {"epsilon", entry.epsilon},
                 {"m", entry.m},
                 {"k", entry.k},
                 {"payload", entry.payload}};
    if (entry.row.has_value()) item["row"] = *entry.row;
    records.push_back(std::move(item));
  }
  json doc = {{"format", kReportFormat},
              {"created_at", file.created_at},
              {"folder", FolderClassName(file.folder_class)},
              {"records", records}};
  return doc.dump(2) + "\n";
}

absl::StatusOr<ReportFile> ParseReport(absl::string_view text, std::string path) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    return MalformedReport(path, "not a JSON object");
  }
  if (doc.value("format", "") != kReportFormat) {
    return MalformedReport(path, "unknown format tag");
  }
  ReportFile file;
  file.path = std::move(path);
  auto created = doc.find("created_at");
  if (created == doc.end() || !created->is_number_integer()) {
    return MalformedReport(file.path, "missing created_at");
  }
  file.created_at = created->get<int64_t>();
  const std::string folder = doc.value("folder", "");
  if (folder == "diagnostic") {
    file.folder_class = FolderClass::kDiagnostic;
  } else if (folder == "parsec") {
    file.folder_class = FolderClass::kParsec;
  } else {
    return MalformedReport(file.path, "unknown folder class");
  }
  auto records = doc.find("records");
  if (records == doc.end() || !records->is_array()) {
    return MalformedReport(file.path, "missing records array");
  }
  for (const json& item : *records) {
    if (!item.is_object()) {
      ++file.rejected_entries;
      continue;
    }
    auto key = item.find("key");
    auto algorithm = item.find("algorithm");
    auto epsilon = item.find("epsilon");
    auto m = item.find("m");
    auto k = item.find("k");
    auto payload = item.find("payload");
    if (key == item.end() || !key->is_string() || algorithm == item.end() ||
        !algorithm->is_string() || epsilon == item.end() ||
        !epsilon->is_number() || m == item.end() ||
        !m->is_number_unsigned() || k == item.end() ||
        !k->is_number_unsigned() || payload == item.end() ||
        !payload->is_string()) {
      ++file.rejected_entries;
      continue;
    }
    absl::StatusOr<Algorithm> parsed = ParseAlgorithm(algorithm->get<std::string>());
    if (!parsed.ok()) {
      ++file.rejected_entries;
      continue;
    }
    ReportEntry entry;
    entry.key_name = key->get<std::string>();
    entry.algorithm = *parsed;
    entry.epsilon = epsilon->get<double>();
    entry.m = m->get<uint32_t>();
    entry.k = k->get<uint32_t>();
    entry.payload = payload->get<std::string>();
    if (auto row = item.find("row"); row != item.end()) {
      if (!row->is_number_unsigned()) {
        ++file.rejected_entries;
        continue;
      }
      entry.row = row->get<uint32_t>();
    }
    file.entries.push_back(std::move(entry));
  }
  return file;
}

absl::StatusOr<std::vector<uint8_t>> DecodeEntryBits(const ReportEntry& entry) {
  return DecodeBits(entry.payload, entry.m);
}

std::vector<ReportFile> ReportFilesMaintenance(std::vector<ReportFile>& files,
                                               UnixSeconds now,
                                               const RetentionPolicy& policy) {
  std::vector<ReportFile> deleted;
  std::vector<ReportFile> kept;
  for (ReportFile& file : files) {
    if (now - file.created_at > policy.max_age_seconds) {
      deleted.push_back(std::move(file));
    } else {
      kept.push_back(std::move(file));
    }
  }
  files = std::move(kept);
  return deleted;
}

absl::Status WriteReport(const fs::path& workdir, const ReportFile& file) {
  const fs::path target = workdir / file.path;
  std::error_code error;
  fs::create_directories(target.parent_path(), error);
  if (error) {
    return absl::InternalError(
        absl::StrCat("cannot create ", target.parent_path().string(), ": ",
                     error.message()));
  }
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  out << SerializeReport(file);
  if (!out) {
    return absl::InternalError(absl::StrCat("cannot write ", target.string()));
  }
  return absl::OkStatus();
}

absl::Status RemoveReport(const fs::path& workdir, const ReportFile& file) {
  std::error_code error;
  fs::remove(workdir / file.path, error);
  if (error) {
    return absl::InternalError(
        absl::StrCat("cannot remove ", file.path, ": ", error.message()));
  }
  return absl::OkStatus();
}

absl::StatusOr<ReportDirectoryListing> ReadReportDirectories(
    const fs::path& workdir) {
  std::error_code workdir_error;
  if (!fs::is_directory(workdir, workdir_error)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "MalformedReportDir: ", workdir.string(), " is not a directory"));
  }
  ReportDirectoryListing listing;
  for (FolderClass folder : kFolders) {
    const fs::path directory = workdir / std::string(FolderDirectory(folder));
    std::error_code error;
    if (!fs::exists(directory, error)) continue;
    if (!fs::is_directory(directory, error)) {
      return absl::FailedPreconditionError(absl::StrCat(
          "MalformedReportDir: ", directory.string(), " is not a directory"));
    }
    for (const auto& item : fs::directory_iterator(directory, error)) {
      if (!item.is_regular_file()) continue;
      const std::string name = item.path().filename().string();
      if (!absl::EndsWith(name, FolderExtension(folder))) continue;
      const std::string relative =
          absl::StrCat(FolderDirectory(folder), "/", name);
      std::ifstream in(item.path(), std::ios::binary);
      std::ostringstream buffer;
      buffer << in.rdbuf();
      absl::StatusOr<ReportFile> file = ParseReport(buffer.str(), relative);
      if (file.ok()) {
        listing.files.push_back(*std::move(file));
      } else {
        listing.unreadable.push_back(relative);
      }
    }
    if (error) {
      return absl::FailedPreconditionError(absl::StrCat(
          "MalformedReportDir: ", directory.string(), ": ", error.message()));
    }
  }
  std::sort(listing.files.begin(), listing.files.end(),
            [](const ReportFile& a, const ReportFile& b) { return a.path < b.path; });
  std::sort(listing.unreadable.begin(), listing.unreadable.end());
  return listing;
}

}  // namespace dpbudget
