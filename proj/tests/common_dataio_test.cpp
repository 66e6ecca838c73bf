/*
 * Copyright 2026 The DrRL Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sstream>

#include <gtest/gtest.h>

#include "drrl/dataio.hpp"
#include "drrl/synthetic.hpp"
#include "test_util.hpp"

namespace drrl {
namespace {

InteractionLog parse(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in);
}

// Log where user u has items 0..n_u-1 at timestamps 1..n_u.
InteractionLog ladder_log(const std::vector<int>& counts) {
  std::ostringstream o;
  for (std::size_t u = 0; u < counts.size(); ++u) {
    for (int i = 0; i < counts[u]; ++i) o << u << ' ' << i << ' ' << i + 1 << '\n';
  }
  return parse(o.str());
}

TEST(Common, DotNormAndPositivePart) {
  const Vec a{3.0, 4.0}, b{1.0, -1.0};
  EXPECT_DOUBLE_EQ(dot(a, b), -1.0);
  EXPECT_DOUBLE_EQ(norm2(a), 5.0);
  EXPECT_DOUBLE_EQ(positive_part(-0.5), 0.0);
  EXPECT_DOUBLE_EQ(positive_part(0.5), 0.5);
  EXPECT_DOUBLE_EQ(mean(a), 3.5);
}

TEST(Common, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(9, 3), derive_seed(9, 3));
}

TEST(Common, AtomicWriteLeavesNoTempFile) {
  testing::TempDir dir;
  write_file_atomic(dir / "x.txt", "hello");
  EXPECT_EQ(testing::read_text(dir / "x.txt"), "hello");
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1);
}

TEST(LoadInteractions, DuplicatesKeepEarliestTimestamp) {
  const auto log = parse("0 1 10\n0 1 5\n1 2 7\n");
  ASSERT_EQ(log.interactions.size(), 2u);
  EXPECT_TRUE(log.has_timestamps);
  bool found = false;
  for (const auto& r : log.interactions) {
    if (log.user_ids[r.user] == 0 && log.item_ids[r.item] == 1) {
      EXPECT_EQ(r.timestamp, 5);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(LoadInteractions, CountsDenseIds) {
  const auto log = parse("10 100\n10 101\n11 102\n12 103\n12 100\n");
  EXPECT_EQ(log.num_users, 3);
  EXPECT_EQ(log.num_items, 4);
  EXPECT_FALSE(log.has_timestamps);
}

TEST(LoadInteractions, MalformedRowReportsLine) {
  try {
    parse("a b\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  try {
    parse("0 1\n0 x\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(LoadInteractions, EmptyInputIsAnError) {
  EXPECT_THROW(parse(""), Error);
  EXPECT_THROW(load_interactions("/nonexistent/drrl/log.tsv"), Error);
}

TEST(KCore, RemovesSparseNodesIteratively) {
  // Users 0 and 1 share items 0 and 1; user 2 only touches item 2.
  const auto log = parse("0 0\n0 1\n1 0\n1 1\n2 2\n");
  const auto core = k_core_filter(log, 2);
  EXPECT_EQ(core.num_users, 2);
  EXPECT_EQ(core.num_items, 2);
  EXPECT_EQ(core.interactions.size(), 4u);
}

TEST(SplitIid, RoundingRuleOnTenItems) {
  const auto s = split_iid(ladder_log({10}), 0.8, 0.1, 42);
  EXPECT_EQ(s.train[0].size(), 7u);
  EXPECT_EQ(s.validation[0].size(), 1u);
  EXPECT_EQ(s.test[0].size(), 2u);
}

TEST(SplitIid, SingleItemUserKeepsTrain) {
  const auto s = split_iid(ladder_log({1, 5}), 0.8, 0.1, 1);
  EXPECT_EQ(s.train[0].size(), 1u);
  EXPECT_TRUE(s.validation[0].empty());
  EXPECT_TRUE(s.test[0].empty());
}

TEST(SplitIid, DeterministicAndDisjoint) {
  const auto log = make_block_dataset({});
  const auto a = split_iid(log, 0.8, 0.1, 42);
  const auto b = split_iid(log, 0.8, 0.1, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  for (std::size_t u = 0; u < a.train.size(); ++u) {
    std::vector<Index> all = a.train[u];
    all.insert(all.end(), a.validation[u].begin(), a.validation[u].end());
    all.insert(all.end(), a.test[u].begin(), a.test[u].end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    EXPECT_EQ(all.size(), 16u);
  }
}

TEST(SplitIid, RejectsBadFractions) {
  EXPECT_THROW(split_iid(ladder_log({4}), 1.0, 0.1, 0), Error);
  EXPECT_THROW(split_iid(ladder_log({4}), 0.8, 1.0, 0), Error);
}

TEST(SplitTemporal, MostRecentShareIsTest) {
  // A second user holds items 0..4 in train so no test item is filtered.
  const auto s = split_temporal(ladder_log({5, 9}), 0.2, 0.0);
  ASSERT_EQ(s.test[0].size(), 1u);
  EXPECT_EQ(s.test[0][0], 4);  // item stamped t = 5
  EXPECT_EQ(s.kind, SplitKind::kTemporalOod);
}

TEST(SplitTemporal, DropsItemsUnseenInTrain) {
  // Item 9 is only ever the latest interaction of user 0.
  const auto s = split_temporal(parse("0 1 1\n0 2 2\n0 3 3\n0 4 4\n0 9 5\n1 1 1\n1 2 2\n"), 0.2,
                                0.0);
  EXPECT_TRUE(s.test[0].empty());
}

TEST(SplitTemporal, ZeroTestShareAndMissingTimestamps) {
  const auto s = split_temporal(ladder_log({5, 3}), 0.0, 0.0);
  EXPECT_EQ(s.count(s.test), 0u);
  EXPECT_THROW(split_temporal(parse("0 1\n1 2\n"), 0.2), Error);
}

class SamplerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    split = split_iid(make_block_dataset({}), 0.8, 0.1, 3, SplitKind::kNoise);
    pairs = train_pairs(split);
  }
  DatasetSplit split;
  std::vector<std::pair<Index, Index>> pairs;
};

TEST_F(SamplerTest, CleanNegativesAvoidTrainPositives) {
  std::mt19937_64 rng(1);
  const auto b = sample_batch(split, pairs, 64, 16, NoiseConfig{0.0}, rng);
  ASSERT_EQ(b.negatives.size(), b.pairs.size() * 16);
  ASSERT_EQ(b.false_negative_mask.size(), b.negatives.size());
  for (std::size_t p = 0; p < b.pairs.size(); ++p) {
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_EQ(b.mask_of(p)[k], 0);
      EXPECT_FALSE(split.is_train_positive(b.pairs[p].first, b.negatives_of(p)[k]));
    }
  }
}

TEST_F(SamplerTest, FullNoiseDrawsHeldOutPositives) {
  std::mt19937_64 rng(2);
  const auto b = sample_batch(split, pairs, 64, 8, NoiseConfig{1.0}, rng);
  for (std::size_t p = 0; p < b.pairs.size(); ++p) {
    const auto u = static_cast<std::size_t>(b.pairs[p].first);
    for (std::size_t k = 0; k < 8; ++k) {
      const Index j = b.negatives_of(p)[k];
      EXPECT_EQ(b.mask_of(p)[k], 1);
      const bool held_out =
          std::binary_search(split.validation[u].begin(), split.validation[u].end(), j) ||
          std::binary_search(split.test[u].begin(), split.test[u].end(), j);
      EXPECT_TRUE(held_out);
    }
  }
}

TEST_F(SamplerTest, NoiseRateMatchesRatio) {
  std::mt19937_64 rng(3);
  std::size_t flagged = 0, total = 0;
  while (total < 100000) {
    const auto b = sample_batch(split, pairs, 100, 100, NoiseConfig{0.25}, rng);
    for (auto m : b.false_negative_mask) flagged += m;
    total += b.false_negative_mask.size();
  }
  EXPECT_NEAR(static_cast<double>(flagged) / static_cast<double>(total), 0.25, 0.01);
}

TEST_F(SamplerTest, NoiseIgnoredOnCleanSplits) {
  split.kind = SplitKind::kIid;
  std::mt19937_64 rng(4);
  const auto b = sample_batch(split, pairs, 32, 8, NoiseConfig{1.0}, rng);
  for (auto m : b.false_negative_mask) EXPECT_EQ(m, 0);
}

TEST(SplitFiles, RoundTrip) {
  testing::TempDir dir;
  const auto log = make_block_dataset({});
  const auto s = split_iid(log, 0.8, 0.1, 5);
  write_split(dir.path(), s, &log);
  for (const char* f : {"train.tsv", "validation.tsv", "test.tsv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto r = read_split(dir.path());
  EXPECT_EQ(r.num_users, s.num_users);
  EXPECT_EQ(r.num_items, s.num_items);
  EXPECT_EQ(r.kind, s.kind);
  EXPECT_EQ(r.train, s.train);
  EXPECT_EQ(r.validation, s.validation);
  EXPECT_EQ(r.test, s.test);
}

TEST(SplitFiles, MissingManifest) {
  testing::TempDir dir;
  EXPECT_THROW(read_split(dir.path()), Error);
}

TEST(Synthetic, BlockStructureAndDeterminism) {
  const auto a = make_block_dataset({});
  const auto b = make_block_dataset({});
  ASSERT_EQ(a.interactions.size(), 100u * 16u);
  std::size_t cross = 0;
  for (std::size_t k = 0; k < a.interactions.size(); ++k) {
    EXPECT_EQ(a.interactions[k].item, b.interactions[k].item);
    const auto& r = a.interactions[k];
    if (r.item * 2 / 60 != r.user % 2) ++cross;
  }
  const double rate = static_cast<double>(cross) / static_cast<double>(a.interactions.size());
  EXPECT_LT(rate, 0.1);
  EXPECT_GT(rate, 0.01);
}

}  // namespace
}  // namespace drrl
