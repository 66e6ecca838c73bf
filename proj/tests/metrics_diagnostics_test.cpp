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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drrl/diagnostics.hpp"
#include "drrl/metrics.hpp"
#include "drrl/synthetic.hpp"

namespace drrl {
namespace {

using Ids = std::vector<Index>;

TEST(TopK, TiesBreakByAscendingIdAndExclusionsDrop) {
  const Vec s{0.5, 0.9, 0.5, 0.9, 0.1};
  const Ids ex{1};
  EXPECT_EQ(top_k({s, ex, {}}, 3), (Ids{3, 0, 2}));
  EXPECT_EQ(top_k({s, {}, {}}, 10).size(), 5u);
}

TEST(Recall, Examples) {
  const Vec s{0.9, 0.8, 0.1, 0.0};
  const Ids none;
  EXPECT_DOUBLE_EQ(*recall_at_k({s, none, Ids{0, 1}}, 2), 1.0);
  EXPECT_DOUBLE_EQ(*recall_at_k({s, none, Ids{2, 3}}, 2), 0.0);
  // truth {a, b} = {0, 3}, top-2 = [0, 1].
  EXPECT_DOUBLE_EQ(*recall_at_k({s, none, Ids{0, 3}}, 2), 0.5);
  EXPECT_FALSE(recall_at_k({s, none, Ids{}}, 2).has_value());
}

TEST(Ndcg, Examples) {
  const Vec s{0.9, 0.8, 0.1};
  const Ids none;
  EXPECT_DOUBLE_EQ(*ndcg_at_k({s, none, Ids{0}}, 5), 1.0);
  EXPECT_NEAR(*ndcg_at_k({s, none, Ids{1}}, 2), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(*ndcg_at_k({s, none, Ids{1}}, 2), 0.63093, 1e-5);
  EXPECT_DOUBLE_EQ(*ndcg_at_k({s, none, Ids{2}}, 2), 0.0);
  EXPECT_FALSE(ndcg_at_k({s, none, Ids{}}, 2).has_value());
}

TEST(EvaluateRanking, SkipsUsersWithoutTruth) {
  EmbeddingTable t(2, 3, 2);
  t.user(0)[0] = 1.0;
  t.user(1)[1] = 1.0;
  t.item(0)[0] = 1.0;
  t.item(1)[1] = 1.0;
  t.item(2)[0] = -1.0;
  const auto rep = evaluate_ranking(t, {{}, {}}, {{0}, {}}, {1, 2});
  EXPECT_EQ(rep.users_evaluated, 1u);
  EXPECT_DOUBLE_EQ(rep.get("recall", 1), 1.0);
  EXPECT_DOUBLE_EQ(rep.get("ndcg", 2), 1.0);
  EXPECT_THROW(rep.get("recall", 5), Error);
}

TEST(EvaluateSplit, NamesMismatchedDimension) {
  DatasetSplit s;
  s.num_users = 2;
  s.num_items = 4;
  s.train.assign(2, {});
  s.validation.assign(2, {});
  s.test.assign(2, {});
  try {
    evaluate_split(EmbeddingTable(2, 3, 2), s, EvalTarget::kTest, {20});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("item count"), std::string::npos);
  }
  try {
    evaluate_split(EmbeddingTable(3, 4, 2), s, EvalTarget::kTest, {20});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("user count"), std::string::npos);
  }
}

TEST(EvaluateSplit, RandomModelNearRandomBaseline) {
  const auto split = split_iid(make_block_dataset({}), 0.8, 0.1, 11);
  double recall = 0.0;
  const int models = 20;
  for (int m = 0; m < models; ++m) {
    EmbeddingTable t(split.num_users, split.num_items, 16);
    std::mt19937_64 rng(derive_seed(99, static_cast<std::uint64_t>(m)));
    init_normal(t, 0.1, rng);
    recall += evaluate_split(t, split, EvalTarget::kTest, {10}).get("recall", 10);
  }
  recall /= models;
  // Candidates per user are the items outside train and validation.
  double baseline = 0.0;
  for (Index u = 0; u < split.num_users; ++u) {
    const auto c = static_cast<double>(split.num_items) -
                   static_cast<double>(split.train[u].size() + split.validation[u].size());
    baseline += 10.0 / c;
  }
  baseline /= split.num_users;
  EXPECT_NEAR(recall, baseline, 0.03);
}

TEST(WeightStats, Examples) {
  const Vec uniform{2.0, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(weight_stats(uniform, {}).k1, 1.0);
  const Vec w{3.0, 1.0, 1.0, 1.0};
  const std::vector<std::uint8_t> mask{1, 0, 0, 0};
  const auto s = weight_stats(w, mask);
  EXPECT_DOUBLE_EQ(s.k1, 2.0);
  ASSERT_TRUE(s.k2.has_value());
  EXPECT_DOUBLE_EQ(*s.k2, 2.0);
  EXPECT_FALSE(weight_stats(w, {}).k2.has_value());
  EXPECT_FALSE(weight_stats(w, std::vector<std::uint8_t>(4, 0)).k2.has_value());
  EXPECT_TRUE(weight_stats(Vec{0.0, 0.0}, {}).degenerate);
}

TEST(TruncationRatio, Examples) {
  const Vec s{0.9, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(truncation_ratio(s, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(truncation_ratio(s, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(truncation_ratio(s, 0.4), 1.0 / 3.0);
}

class DiagnosticsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    BlockDatasetConfig cfg;
    cfg.users = 20;
    cfg.items = 30;
    cfg.per_user = 8;
    split = split_iid(make_block_dataset(cfg), 0.8, 0.1, 2);
    repr = EmbeddingTable(split.num_users, split.num_items, 8);
    std::mt19937_64 rng(4);
    init_normal(repr, 1.0, rng);
  }
  DatasetSplit split;
  EmbeddingTable repr;
};

TEST_F(DiagnosticsTest, SoftmaxWeightsHaveUnitMeanAndNoK2OnCleanSplit) {
  LossSpec spec;
  spec.kind = LossKind::kSoftmax;
  const auto s = compute_diagnostics(repr, split, spec);
  EXPECT_EQ(s.users.size(), 20u);
  EXPECT_FALSE(s.mean_k2.has_value());
  EXPECT_FALSE(s.mean_truncation.has_value());
  EXPECT_GE(s.mean_k1, 1.0);
}

TEST_F(DiagnosticsTest, NoiseSplitReportsK2) {
  split.kind = SplitKind::kNoise;
  LossSpec spec;
  spec.kind = LossKind::kSoftmax;
  const auto s = compute_diagnostics(repr, split, spec);
  ASSERT_TRUE(s.mean_k2.has_value());
  EXPECT_GT(*s.mean_k2, 0.0);
}

TEST_F(DiagnosticsTest, DrrlReportsTruncationPerUser) {
  LossSpec spec;
  spec.kind = LossKind::kDrrl;
  spec.gamma_star = 2.0;
  spec.c = 1.2;
  MarginState margins(split.num_users, 0.1);
  const auto s = compute_diagnostics(repr, split, spec, &margins);
  ASSERT_TRUE(s.mean_truncation.has_value());
  ASSERT_TRUE(s.mean_learned_truncation.has_value());
  for (const auto& u : s.users) {
    ASSERT_TRUE(u.truncation.has_value());
    EXPECT_GE(*u.truncation, 0.0);
    EXPECT_LE(*u.truncation, 1.0);
    EXPECT_DOUBLE_EQ(*u.learned_margin, 0.1);
  }
}

TEST_F(DiagnosticsTest, DrrlWeightsAtSolvedMarginHaveUnitMean) {
  LossSpec spec;
  spec.kind = LossKind::kDrrl;
  spec.gamma_star = 2.0;
  spec.c = 1.5;
  spec.eps = 0.0;
  const auto neg = user_negatives(repr, split, 3);
  const auto m = solve_margin(neg.scores, spec.gamma_star, spec.c, spec.eps);
  const auto w = drrl_worst_case_weights(neg.scores, spec.gamma(), spec.c, m.arg);
  EXPECT_NEAR(mean(w.weights), 1.0, 1e-6);
}

TEST_F(DiagnosticsTest, RejectsUnweightedLosses) {
  for (auto k : {LossKind::kMse, LossKind::kBce, LossKind::kBpr}) {
    LossSpec spec;
    spec.kind = k;
    EXPECT_THROW(compute_diagnostics(repr, split, spec), Error);
  }
}

}  // namespace
}  // namespace drrl
