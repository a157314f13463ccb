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

#include "dpbudget/collector.h"

#include <cmath>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "dpbudget/kernels.h"
#include "dpbudget/store.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dpbudget {
namespace {

using ::testing::ElementsAre;

ReportEntry ObhEntry(std::vector<uint8_t> bits, double epsilon = 1.0) {
  ReportEntry entry;
  entry.key_name = "com.apple.health.datatypes";
  entry.algorithm = Algorithm::kOneBitHistogram;
  entry.epsilon = epsilon;
  entry.m = static_cast<uint32_t>(bits.size());
  entry.k = 1;
  entry.payload = EncodeBits(bits);
  return entry;
}

ReportFile FileOf(std::vector<ReportEntry> entries) {
  ReportFile file;
  file.path = "DiagnosticReports/DifferentialPrivacy-1970-01-01-000000.dpsub.json";
  file.folder_class = FolderClass::kDiagnostic;
  file.entries = std::move(entries);
  return file;
}

TEST(IngestTest, SingleHistogramEntry) {
  const std::vector<ReportFile> files = {
      FileOf({ObhEntry({0, 0, 0, 1, 0, 0, 0, 0})})};
  const Aggregates aggregates = Ingest(files);
  ASSERT_EQ(aggregates.obh.size(), 1u);
  const AggregateObh& aggregate = aggregates.obh.begin()->second;
  EXPECT_EQ(aggregate.n, 1);
  EXPECT_THAT(aggregate.counts, ElementsAre(0, 0, 0, 1, 0, 0, 0, 0));
  EXPECT_EQ(aggregates.malformed_entries, 0);
}

TEST(IngestTest, DuplicatedFilesDoubleCounts) {
  const ReportFile file = FileOf({ObhEntry({0, 1, 1, 0})});
  const std::vector<ReportFile> files = {file, file};
  const Aggregates aggregates = Ingest(files);
  const AggregateObh& aggregate = aggregates.obh.begin()->second;
  EXPECT_EQ(aggregate.n, 2);
  EXPECT_THAT(aggregate.counts, ElementsAre(0, 2, 2, 0));
}

TEST(IngestTest, RejectsInconsistentEntries) {
  ReportEntry truncated = ObhEntry({1, 0, 0, 0});
  truncated.m = 64;  // payload carries only four bits
  ReportEntry resized = ObhEntry({1, 0});
  ReportEntry bad_row = ObhEntry({1, 0, 0, 0});
  bad_row.key_name = "com.apple.keyboard.NewWords.en_US";
  bad_row.algorithm = Algorithm::kCountMedianSketch;
  bad_row.k = 4;
  bad_row.row = 4;
  const std::vector<ReportFile> files = {
      FileOf({ObhEntry({1, 0, 0, 0}), truncated, resized, bad_row})};
  const Aggregates aggregates = Ingest(files);
  EXPECT_EQ(aggregates.malformed_entries, 3);
  EXPECT_EQ(aggregates.obh.begin()->second.n, 1);
  EXPECT_TRUE(aggregates.cms.empty());
}

TEST(IngestTest, CarriesFileLevelRejections) {
  ReportFile file = FileOf({});
  file.rejected_entries = 2;
  const std::vector<ReportFile> files = {file};
  EXPECT_EQ(Ingest(files).malformed_entries, 2);
}

TEST(EstimateObhTest, NoiselessCoinReturnsCounts) {
  AggregateObh aggregate;
  aggregate.m = 3;
  aggregate.n = 7;
  aggregate.counts = {4, 2, 1};
  absl::StatusOr<std::vector<double>> estimate =
      EstimateObh(aggregate, *BiasedCoin::WithProbability(0.0));
  ASSERT_TRUE(estimate.ok());
  EXPECT_THAT(*estimate, ElementsAre(4.0, 2.0, 1.0));
}

TEST(EstimateObhTest, EmptyAggregateIsZero) {
  AggregateObh aggregate;
  aggregate.m = 4;
  aggregate.counts = {0, 0, 0, 0};
  EXPECT_THAT(*EstimateObh(aggregate, 1.0), ElementsAre(0.0, 0.0, 0.0, 0.0));
}

TEST(EstimateObhTest, DegenerateCoin) {
  AggregateObh aggregate;
  aggregate.counts = {1};
  EXPECT_EQ(EstimateObh(aggregate, 0.0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(EstimateObh(aggregate, -1.0).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(EstimateObhTest, RecoversDistribution) {
  constexpr int kN = 100000;
  const std::vector<double> truth = {0.5, 0.3, 0.2, 0, 0, 0, 0, 0};
  std::vector<uint32_t> buckets;
  buckets.reserve(kN);
  for (int i = 0; i < kN; ++i) {
    buckets.push_back(i < kN / 2 ? 0 : (i < kN / 2 + 3 * kN / 10 ? 1 : 2));
  }
  const BiasedCoin coin = *BiasedCoin::FromEpsilon(1.0);
  const std::vector<ObhPayload> payloads =
      PrivatizeObhBatch(buckets, 8, coin, RandomSource(2017));
  const AggregateObh aggregate = AggregateObhPayloads("k", 8, 1.0, payloads);
  const std::vector<double> estimate = *EstimateObh(aggregate, coin);
  for (size_t i = 0; i < truth.size(); ++i) {
    EXPECT_NEAR(estimate[i] / kN, truth[i], 0.01) << "bucket " << i;
  }
}

TEST(EstimateObhTest, UnbiasedAcrossSeeds) {
  // Mean of many small independent estimates approaches the truth.
  const BiasedCoin coin = *BiasedCoin::FromEpsilon(0.5);
  const std::vector<uint32_t> buckets(200, 1);
  double sum = 0;
  constexpr int kTrials = 200;
  for (int seed = 0; seed < kTrials; ++seed) {
    const std::vector<ObhPayload> payloads =
        PrivatizeObhBatch(buckets, 4, coin, RandomSource(seed));
    sum += (*EstimateObh(AggregateObhPayloads("k", 4, 0.5, payloads), coin))[1];
  }
  const double p = coin.p();
  const double sigma =
      std::sqrt(200 * p * (1 - p)) / (1 - 2 * p) / std::sqrt(kTrials);
  EXPECT_NEAR(sum / kTrials, 200.0, 4 * sigma);
}

TEST(EstimateCmsTest, NoiselessSingleRow) {
  RandomSource rng(5);
  const BiasedCoin coin = *BiasedCoin::WithProbability(0.0);
  const std::vector<CmsPayload> payloads = {
      *PrivatizeCms("hello", coin, 1, 1024, rng)};
  const AggregateCms aggregate = AggregateCmsPayloads("k", 1, 1024, 0, payloads);
  const std::vector<std::string> candidates = {"hello", "world"};
  absl::StatusOr<std::map<std::string, double>> estimate =
      EstimateCms(aggregate, candidates, coin);
  ASSERT_TRUE(estimate.ok());
  EXPECT_EQ(estimate->at("hello"), 1.0);
  EXPECT_EQ(estimate->at("world"), 0.0);
}

class CmsAccuracyTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::vector<std::string> data(50000, "alpha");
    data.insert(data.end(), 10000, "beta");
    coin_ = new BiasedCoin(*BiasedCoin::FromEpsilon(2.0));
    const std::vector<CmsPayload> payloads =
        PrivatizeCmsBatch(data, *coin_, 16, 1024, RandomSource(77));
    aggregate_ = new AggregateCms(AggregateCmsPayloads("k", 16, 1024, 2.0, payloads));
  }
  static void TearDownTestSuite() {
    delete aggregate_;
    delete coin_;
  }
  static std::map<std::string, double> Estimate(std::vector<std::string> candidates) {
    return *EstimateCms(*aggregate_, candidates, *coin_);
  }

  static BiasedCoin* coin_;
  static AggregateCms* aggregate_;
};

BiasedCoin* CmsAccuracyTest::coin_ = nullptr;
AggregateCms* CmsAccuracyTest::aggregate_ = nullptr;

TEST_F(CmsAccuracyTest, HeavyHittersWithinFivePercent) {
  const std::map<std::string, double> estimate = Estimate({"alpha", "beta"});
  EXPECT_NEAR(estimate.at("alpha"), 50000, 0.05 * 50000);
  EXPECT_NEAR(estimate.at("beta"), 10000, 0.05 * 10000);
}

TEST_F(CmsAccuracyTest, AbsentCandidateNearZero) {
  // Per-row estimate variance is k^2 n_row p(1-p) / (1-2p)^2; the median
  // of k rows is bounded here by the single-row deviation.
  const double p = coin_->p();
  const double n_row = 60000.0 / 16;
  const double sigma = 16 * std::sqrt(n_row * p * (1 - p)) / (1 - 2 * p);
  const std::map<std::string, double> estimate = Estimate({"gamma"});
  EXPECT_NEAR(estimate.at("gamma"), 0.0, 3 * sigma);
  EXPECT_EQ(aggregate_->n, 60000);
  int64_t rows = 0;
  for (int64_t seen : aggregate_->counts.rows_seen) rows += seen;
  EXPECT_EQ(rows, 60000);
}

TEST(EstimateCmsTest, EmptySketchAndDegenerateCoin) {
  const std::vector<std::string> candidates = {"a"};
  EXPECT_FALSE(EstimateCms(AggregateCms{}, candidates, 1.0).ok());
  const AggregateCms aggregate = AggregateCmsPayloads("k", 2, 8, 0, {});
  EXPECT_EQ(EstimateCms(aggregate, candidates, 0.0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(EstimateCms(aggregate, candidates, 1.0)->at("a"), 0.0);
}

TEST(EstimatesToJsonTest, ReportsBothKinds) {
  RandomSource rng(9);
  ReportEntry sketch;
  sketch.key_name = "com.apple.keyboard.NewWords.en_US";
  sketch.algorithm = Algorithm::kCountMedianSketch;
  sketch.epsilon = 2;
  sketch.m = 16;
  sketch.k = 4;
  const CmsPayload payload =
      *PrivatizeCms("word", *BiasedCoin::FromEpsilon(2), 4, 16, rng);
  sketch.row = payload.row;
  sketch.payload = EncodeBits(payload.bits);
  const std::vector<ReportFile> files = {FileOf({ObhEntry({1, 0}), sketch})};
  const std::vector<std::string> candidates = {"word"};
  const nlohmann::json doc = EstimatesToJson(Ingest(files), candidates);
  EXPECT_EQ(doc["histograms"]["com.apple.health.datatypes"]["n"], 1);
  EXPECT_TRUE(doc["sketches"]["com.apple.keyboard.NewWords.en_US"]["estimate"]
                  .contains("word"));
  EXPECT_EQ(doc["malformed_entries"], 0);
}

}  // namespace
}  // namespace dpbudget
