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

#include "dpbudget/store.h"

#include <string>
#include <vector>

#include "absl/status/status.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dpbudget {
namespace {

using ::testing::ElementsAre;

constexpr char kEmoji[] = "com.apple.keyboard.Emoji.en_US.EmojiKeyboard";
constexpr char kEmojiBudget[] = "com.apple.keyboard.Emoji";
constexpr char kNewWords[] = "com.apple.keyboard.NewWords.en_US";
constexpr char kNewWordsBudget[] = "com.apple.keyboard.NewWords";

ConfigBundle Bundled(const std::string& name) { return *LoadProfile(name); }

// One histogram key configured above epsilonMax, one key on a 12h session.
ConfigBundle CustomBundle() {
  ConfigDocuments docs;
  docs.keynames = R"({"k.loud": "Loud", "k.half": "Half"})";
  docs.keyproperties = R"({
    "Loud": {"PrivatizationAlgorithm": "OneBitHistogram",
             "PrivacyParameter": 5, "BudgetKeyName": "b.loud"},
    "Half": {"PrivatizationAlgorithm": "OneBitHistogram",
             "PrivacyParameter": 1, "BudgetKeyName": "b.half"}})";
  docs.algorithmparameters = R"({"OneBitHistogram": {"m": 16}})";
  docs.budgetproperties = R"({
    "b.loud": {"SessionSeconds": 86400, "SessionAmount": 1},
    "b.half": {"SessionSeconds": 43200, "SessionAmount": 1}})";
  return *LoadConfig(docs);
}

PrivatizedRecord FakeRecord(UnixSeconds created, bool submitted = false,
                            std::string version = kCurrentRecordVersion) {
  PrivatizedRecord record;
  record.key_name = kEmoji;
  record.payload = ObhPayload{{0, 1}};
  record.epsilon = 1;
  record.creation_date = created;
  record.submitted = submitted;
  record.version = std::move(version);
  return record;
}

TEST(OptInTest, Macos10123Balances) {
  const Store store = Store::OptIn(Bundled("macos-10.12.3"), 100);
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->balance, 1);
  EXPECT_EQ(store.FindBudget(kNewWordsBudget)->balance, 2);
  EXPECT_EQ(store.FindBudget("com.apple.parsec.AppDeepLink")->balance, 10);
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->last_update, 100);
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->creation_date, 100);
  EXPECT_TRUE(store.records().empty());
}

TEST(OptInTest, IosNewWordsBalanceIsOne) {
  const Store store = Store::OptIn(Bundled("ios-10.1.1"), 0);
  EXPECT_EQ(store.FindBudget(kNewWordsBudget)->balance, 1);
}

TEST(SubmitEventTest, NewWordStoredOnce) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  RandomSource rng(1);
  auto first = store.SubmitEvent(bundle, kNewWords, std::string("hello"), 5, rng);
  auto second = store.SubmitEvent(bundle, kNewWords, std::string("hello"), 6, rng);
  ASSERT_TRUE(first.ok() && second.ok());
  EXPECT_TRUE(first->has_value());
  EXPECT_FALSE(second->has_value());
  EXPECT_EQ(store.records().size(), 1u);
  const PrivatizedRecord& record = store.records().front();
  EXPECT_EQ(record.algorithm, Algorithm::kCountMedianSketch);
  EXPECT_EQ(record.epsilon, 2.0);
  EXPECT_EQ(record.creation_date, 5);
  ASSERT_TRUE(std::holds_alternative<CmsPayload>(record.payload));
  EXPECT_LT(std::get<CmsPayload>(record.payload).row, 16u);
  EXPECT_EQ(std::get<CmsPayload>(record.payload).bits.size(), 1024u);
  // The same word under another locale is a different key.
  auto other = store.SubmitEvent(bundle, "com.apple.keyboard.NewWords.en_GB",
                                 std::string("hello"), 7, rng);
  EXPECT_TRUE(other->has_value());
}

TEST(SubmitEventTest, EmojiStoredEveryTime) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  RandomSource rng(1);
  ASSERT_TRUE(store.SubmitEvent(bundle, kEmoji, Bucket{7}, 0, rng)->has_value());
  ASSERT_TRUE(store.SubmitEvent(bundle, kEmoji, Bucket{7}, 0, rng)->has_value());
  EXPECT_EQ(store.records().size(), 2u);
  EXPECT_THAT(std::vector<uint64_t>({store.records()[0].record_id,
                                     store.records()[1].record_id}),
              ElementsAre(1, 2));
  EXPECT_EQ(std::get<ObhPayload>(store.records()[0].payload).bits.size(), 1024u);
}

TEST(SubmitEventTest, ClampedKeyStoredWithNeverSubmitPriority) {
  const ConfigBundle bundle = CustomBundle();
  Store store = Store::OptIn(bundle, 0);
  RandomSource rng(1);
  auto record = store.SubmitEvent(bundle, "k.loud", Bucket{3}, 0, rng);
  ASSERT_TRUE(record.ok() && record->has_value());
  EXPECT_EQ((*record)->epsilon, 1.0);
  EXPECT_EQ((*record)->submission_priority, kNeverSubmitPriority);
}

TEST(SubmitEventTest, Errors) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  RandomSource rng(1);
  EXPECT_EQ(store.SubmitEvent(bundle, "nope", Bucket{1}, 0, rng).status().code(),
            absl::StatusCode::kNotFound);
  EXPECT_EQ(store.SubmitEvent(bundle, kEmoji, Bucket{1024}, 0, rng).status().code(),
            absl::StatusCode::kOutOfRange);
  EXPECT_EQ(
      store.SubmitEvent(bundle, kNewWords, std::string(""), 0, rng).status().code(),
      absl::StatusCode::kInvalidArgument);
  EXPECT_TRUE(store.records().empty());
}

TEST(UpdateAllBudgetsTest, ZeroElapsedChangesNothing) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  const Store before = store;
  absl::StatusOr<std::vector<BudgetIncrement>> increments =
      store.UpdateAllBudgets(bundle, 0);
  ASSERT_TRUE(increments.ok());
  for (const BudgetIncrement& inc : *increments) EXPECT_EQ(inc.increment, 0);
  EXPECT_EQ(store, before);
}

TEST(UpdateAllBudgetsTest, TwoDaysAddsTwoEmoji) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  ASSERT_TRUE(store.UpdateAllBudgets(bundle, 2 * kSecondsInOneDay + 5).ok());
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->balance, 3);
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->last_update, 2 * kSecondsInOneDay);
  EXPECT_EQ(store.FindBudget(kNewWordsBudget)->balance, 6);
  // Weekly health budget has not completed a session yet.
  EXPECT_EQ(store.FindBudget("com.apple.health")->balance, 2);
}

TEST(UpdateAllBudgetsTest, NineteenIdleDaysGivesTwenty) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  for (int day = 1; day <= 19; ++day) {
    ASSERT_TRUE(store.UpdateAllBudgets(bundle, day * kSecondsInOneDay).ok());
  }
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->balance, 20);
}

TEST(UpdateAllBudgetsTest, PartialSessionsCarryOver) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  ASSERT_TRUE(store.UpdateAllBudgets(bundle, 36 * 3600).ok());
  ASSERT_TRUE(store.UpdateAllBudgets(bundle, 48 * 3600).ok());
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->balance, 3);
}

TEST(UpdateAllBudgetsTest, ClockWentBackwardsLeavesStoreUntouched) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 1000);
  const Store before = store;
  absl::Status status = store.UpdateAllBudgets(bundle, 999).status();
  EXPECT_EQ(status.code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(store, before);
}

TEST(StorageCullingTest, RemovesSubmittedAndStaleVersions) {
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0);
  for (int i = 0; i < 3; ++i) store.InsertRecordForTesting(FakeRecord(0, true));
  for (int i = 0; i < 2; ++i) store.InsertRecordForTesting(FakeRecord(0, false));
  EXPECT_EQ(store.StorageCulling(0), 3);
  EXPECT_EQ(store.records().size(), 2u);

  store.InsertRecordForTesting(FakeRecord(0, false, "0.9"));
  EXPECT_EQ(store.StorageCulling(0), 1);
  EXPECT_EQ(store.records().size(), 2u);
}

TEST(StorageCullingTest, EmptyStore) {
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0);
  EXPECT_EQ(store.StorageCulling(0), 0);
}

TEST(StorageMaintenanceTest, AgeLimit) {
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0);
  const UnixSeconds now = 20 * kSecondsInOneDay;
  const uint64_t old_id = store.InsertRecordForTesting(FakeRecord(now - 15 * kSecondsInOneDay));
  const uint64_t fresh_id = store.InsertRecordForTesting(FakeRecord(now - kSecondsInOneDay));
  const uint64_t edge_id = store.InsertRecordForTesting(FakeRecord(now - kSecondsIn14Day));
  EXPECT_EQ(store.StorageMaintenance(now), 1);
  EXPECT_EQ(store.FindRecord(old_id), nullptr);
  EXPECT_NE(store.FindRecord(fresh_id), nullptr);
  EXPECT_NE(store.FindRecord(edge_id), nullptr);
}

TEST(StorageMaintenanceTest, KeepsNewestWhenOverCapacity) {
  StoreOptions options;
  options.max_records = 5;
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0, options);
  // Creation dates deliberately out of id order.
  const std::vector<UnixSeconds> created = {50, 10, 80, 20, 70, 30, 60, 40};
  for (UnixSeconds t : created) store.InsertRecordForTesting(FakeRecord(t));
  EXPECT_EQ(store.StorageMaintenance(100), 3);
  std::vector<UnixSeconds> survivors;
  for (const PrivatizedRecord& r : store.records()) survivors.push_back(r.creation_date);
  EXPECT_THAT(survivors, ElementsAre(50, 80, 70, 60, 40));
}

TEST(AnomalousBudgetResetTest, Examples) {
  const ConfigBundle mac = Bundled("macos-10.12.3");
  Store store = Store::OptIn(mac, 0);
  ASSERT_TRUE(store.UpdateAllBudgets(mac, 30 * kSecondsInOneDay).ok());
  store.AnomalousBudgetReset(30 * kSecondsInOneDay);
  EXPECT_EQ(store.FindBudget(kEmojiBudget)->balance, 30);

  Store fresh = Store::OptIn(mac, 0);
  fresh.AnomalousBudgetReset(0);
  EXPECT_EQ(fresh.FindBudget(kEmojiBudget)->balance, 0);

  const ConfigBundle custom = CustomBundle();
  Store half = Store::OptIn(custom, 0);
  ASSERT_TRUE(half.UpdateAllBudgets(custom, 36 * 3600).ok());
  half.AnomalousBudgetReset(36 * 3600);
  EXPECT_EQ(half.FindBudget("b.half")->balance, 1);
}

TEST(SpendTest, DebitsAndRefusesOverdraft) {
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0);
  EXPECT_TRUE(store.Spend(kNewWordsBudget, 2).ok());
  EXPECT_EQ(store.FindBudget(kNewWordsBudget)->balance, 0);
  EXPECT_EQ(store.Spend(kNewWordsBudget, 1).code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(store.Spend("nope", 1).code(), absl::StatusCode::kNotFound);
}

TEST(MarkSubmittedTest, OnlyOnce) {
  Store store = Store::OptIn(Bundled("macos-10.12.3"), 0);
  const uint64_t id = store.InsertRecordForTesting(FakeRecord(0));
  EXPECT_TRUE(store.MarkSubmitted(id).ok());
  EXPECT_TRUE(store.FindRecord(id)->submitted);
  EXPECT_FALSE(store.MarkSubmitted(id).ok());
  EXPECT_EQ(store.MarkSubmitted(999).code(), absl::StatusCode::kNotFound);
}

TEST(StoreJsonTest, RoundTrip) {
  const ConfigBundle bundle = Bundled("macos-10.12.3");
  Store store = Store::OptIn(bundle, 0);
  RandomSource rng(3);
  ASSERT_TRUE(store.SubmitEvent(bundle, kEmoji, Bucket{5}, 10, rng).ok());
  ASSERT_TRUE(store.SubmitEvent(bundle, kNewWords, std::string("xyz"), 11, rng).ok());
  ASSERT_TRUE(store.MarkSubmitted(1).ok());
  ASSERT_TRUE(store.UpdateAllBudgets(bundle, 3 * kSecondsInOneDay).ok());
  absl::StatusOr<Store> restored = Store::FromJson(store.ToJson());
  ASSERT_TRUE(restored.ok()) << restored.status();
  EXPECT_EQ(*restored, store);
  EXPECT_EQ(restored->ToJson().dump(), store.ToJson().dump());
}

TEST(StoreJsonTest, RejectsGarbage) {
  EXPECT_FALSE(Store::FromJson(nlohmann::json::array()).ok());
  EXPECT_FALSE(Store::FromJson(nlohmann::json{{"records", 3}}).ok());
}

TEST(BitsCodecTest, RoundTripAndValidation) {
  const std::vector<uint8_t> bits = {1, 0, 0, 1, 1, 0, 1, 0, 1, 1};
  const std::string encoded = EncodeBits(bits);
  EXPECT_EQ(*DecodeBits(encoded, 10), bits);
  EXPECT_FALSE(DecodeBits(encoded, 17).ok());
  EXPECT_FALSE(DecodeBits("!!!", 10).ok());
  // Padding bit 10 set.
  EXPECT_FALSE(DecodeBits(EncodeBits({1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1}), 10).ok());
}

}  // namespace
}  // namespace dpbudget
