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

// Report files: what leaves the device. A report carries only public
// configuration (key name, algorithm, epsilon, sketch shape) and packed
// privatized bits. No raw datum, user or device identifier is written.
//
// File body (JSON, keys sorted):
//   {
//     "created_at": <unix seconds>,
//     "folder": "diagnostic" | "parsec",
//     "format": "dpbudget-report/1",
//     "records": [
//       {"algorithm": "OneBitHistogram" | "CountMedianSketch",
//        "epsilon": <double>, "k": <int>, "key": <KeyName>, "m": <int>,
//        "payload": <base64 of bits packed little-endian>,
//        "row": <int, sketch records only>}
//     ]
//   }

#ifndef DPBUDGET_REPORT_IO_H_
#define DPBUDGET_REPORT_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpbudget/config.h"
#include "dpbudget/store.h"

namespace dpbudget {

inline constexpr char kReportFormat[] = "dpbudget-report/1";
inline constexpr int64_t kSecondsIn7Hours = 7 * 3600;

enum class FolderClass { kDiagnostic, kParsec };

absl::string_view FolderClassName(FolderClass folder);
// Directory relative to the working directory.
absl::string_view FolderDirectory(FolderClass folder);

// Search and DeepLinks go to the parsec folder, everything else to the
// diagnostic folder.
FolderClass FolderForProperties(absl::string_view properties_name);

struct ReportEntry {
  std::string key_name;
  Algorithm algorithm = Algorithm::kOneBitHistogram;
  double epsilon = 0.0;
  uint32_t m = 0;
  uint32_t k = 1;
  std::optional<uint32_t> row;
  std::string payload;  // EncodeBits() output

  bool operator==(const ReportEntry&) const = default;
};

struct ReportFile {
  std::string path;  // relative to the working directory
  UnixSeconds created_at = 0;
  FolderClass folder_class = FolderClass::kDiagnostic;
  std::vector<ReportEntry> entries;
  // Entries ParseReport could not read (missing or mistyped fields).
  int rejected_entries = 0;

  bool operator==(const ReportFile&) const = default;
};

struct RetentionPolicy {
  int64_t max_age_seconds = 30 * kSecondsInOneDay;

  static RetentionPolicy MacOS() { return {30 * kSecondsInOneDay}; }
  static RetentionPolicy IOS() { return {7 * kSecondsInOneDay}; }
  static RetentionPolicy ForBundle(const ConfigBundle& bundle) {
    return {bundle.report_retention_seconds()};
  }
};

// "<folder dir>/DifferentialPrivacy-YYYY-MM-DD-HHMMSS<ext>", timestamp in UTC,
// shifted forward 7 hours when `shift_7h`. A name already in `taken` gets a
// numeric suffix "_1", "_2", ...
std::string ReportPath(FolderClass folder, UnixSeconds now, bool shift_7h,
                       const std::set<std::string>& taken = {});

// One file per folder class present in `records`, entries in record order.
// EmptySelection if `records` is empty.
absl::StatusOr<std::vector<ReportFile>> RenderReport(
    std::span<const PrivatizedRecord> records, const ConfigBundle& bundle,
    UnixSeconds now, bool shift_7h, const std::set<std::string>& taken = {});

std::string SerializeReport(const ReportFile& file);
absl::StatusOr<ReportFile> ParseReport(absl::string_view text,
                                       std::string path = {});

absl::StatusOr<std::vector<uint8_t>> DecodeEntryBits(const ReportEntry& entry);

// Removes and returns the files older than the policy allows.
std::vector<ReportFile> ReportFilesMaintenance(std::vector<ReportFile>& files,
                                               UnixSeconds now,
                                               const RetentionPolicy& policy);

absl::Status WriteReport(const std::filesystem::path& workdir,
                         const ReportFile& file);
absl::Status RemoveReport(const std::filesystem::path& workdir,
                          const ReportFile& file);

struct ReportDirectoryListing {
  std::vector<ReportFile> files;         // sorted by path
  std::vector<std::string> unreadable;   // paths that failed to parse
};

// Reads both report folders under `workdir`. Missing folders are empty;
// MalformedReportDir if `workdir` or a folder path is not a directory.
absl::StatusOr<ReportDirectoryListing> ReadReportDirectories(
    const std::filesystem::path& workdir);

}  // namespace dpbudget

#endif  // DPBUDGET_REPORT_IO_H_
