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

#include "drrl/losses.hpp"

namespace drrl {
namespace {

LossOutput run(LossOutput (*fn)(const UserLossInput&), const Vec& pos, const Vec& neg) {
  return fn({pos, neg});
}

TEST(Mse, Examples) {
  EXPECT_DOUBLE_EQ(run(mse_loss, {1.0}, {0.0}).value, 0.0);
  EXPECT_DOUBLE_EQ(run(mse_loss, {0.0}, {0.0}).value, 1.0);
  EXPECT_DOUBLE_EQ(run(mse_loss, {0.5}, {0.5}).value, 0.5);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(run(bce_loss, {0.0}, {0.0}).value, 2.0 * std::log(2.0), 1e-12);
  // -log sigmoid(10) is the positive term alone when negatives are far below.
  EXPECT_LT(-std::log(detail::sigmoid(10.0)), 1e-4);
  const double far = run(bce_loss, {10.0}, {-30.0}).value;
  EXPECT_LT(far, 1e-4);
  EXPECT_GT(run(bce_loss, {5.0}, {-30.0}).value, far);
}

TEST(Bpr, EqualScoresGiveLogTwo) {
  EXPECT_NEAR(run(bpr_loss, {0.3}, {0.3}).value, std::log(2.0), 1e-12);
  EXPECT_NEAR(run(bpr_loss, {-0.2}, {-0.2, -0.2, -0.2}).value, std::log(2.0), 1e-12);
}

TEST(Softmax, Examples) {
  EXPECT_NEAR(softmax_loss({Vec{1.0}, Vec{0.0}}, 1.0).value, -1.0, 1e-12);
  EXPECT_NEAR(softmax_loss({Vec{1.0}, Vec{0.0, 0.0}}, 0.5).value, -1.30685, 1e-5);
}

TEST(Softmax, RejectsMissingNegatives) {
  EXPECT_THROW(softmax_loss({Vec{1.0}, Vec{}}, 0.2), Error);
}

TEST(SlWeights, Examples) {
  for (double w : sl_worst_case_weights(Vec{0.4, 0.4, 0.4}, 0.2)) EXPECT_NEAR(w, 1.0, 1e-15);
  const auto w = sl_worst_case_weights(Vec{1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(w[0], 2.0 * e / (e + 1.0), 1e-12);
  EXPECT_NEAR(w[1], 2.0 / (e + 1.0), 1e-12);
  EXPECT_NEAR(w[0], 1.46211, 1e-5);
}

TEST(SlWeights, NoOverflowAtSmallTemperature) {
  const auto w = sl_worst_case_weights(Vec{1.0, -1.0, 0.5}, 1e-3);
  for (double x : w) EXPECT_TRUE(std::isfinite(x));
  EXPECT_NEAR(w[0], 3.0, 1e-9);
}

TEST(Ccl, Examples) {
  EXPECT_NEAR(ccl_loss({Vec{0.9}, Vec{0.5, 0.1}}, 2.0, 0.4).value, -0.8, 1e-12);
  const auto all_below = ccl_loss({Vec{0.9, 0.7}, Vec{0.1, 0.2}}, 3.0, 0.4);
  EXPECT_NEAR(all_below.value, -0.8, 1e-12);
  for (double d : all_below.d_neg) EXPECT_EQ(d, 0.0);
  EXPECT_NEAR(ccl_loss({Vec{0.9}, Vec{0.5, 0.8}}, 0.0, 0.4).value, -0.9, 1e-12);
}

TEST(Drrl, RenyiTermExample) {
  const auto out = drrl_loss({Vec{0.0}, Vec{0.9, 0.5, 0.1}}, 2.0, 1.0, 0.0, 0.4);
  EXPECT_NEAR(out.value, std::sqrt((0.25 + 0.01) / 3.0), 1e-12);
  EXPECT_NEAR(out.value, 0.29439, 1e-5);
}

TEST(Drrl, DegeneratesToCclAtGammaStarOne) {
  const Vec pos{0.2, 0.7}, neg{0.9, 0.5, 0.1, -0.3};
  const auto d = drrl_loss({pos, neg}, 1.0, 2.5, 0.0, 0.3);
  const auto c = ccl_loss({pos, neg}, 2.5, 0.3);
  EXPECT_NEAR(d.value, c.value, 1e-12);
  for (std::size_t j = 0; j < neg.size(); ++j) EXPECT_NEAR(d.d_neg[j], c.d_neg[j], 1e-12);
}

TEST(Drrl, FullTruncation) {
  const auto out = drrl_loss({Vec{0.6}, Vec{0.1, 0.2}}, 3.0, 1.5, 0.0, 0.5);
  EXPECT_NEAR(out.value, -0.6, 1e-15);
  for (double d : out.d_neg) EXPECT_EQ(d, 0.0);
}

TEST(MarginObjective, Examples) {
  const Vec neg{0.9, 0.5, 0.1};
  EXPECT_NEAR(drrl_beta_objective(neg, 2.0, 1.0, 0.0, 0.4), 0.69439, 1e-5);
  EXPECT_DOUBLE_EQ(drrl_beta_objective(neg, 2.0, 1.0, 0.0, 1.0), 1.0);
  EXPECT_LT(drrl_beta_objective(neg, 2.0, 1.0, 0.0, 1.0),
            drrl_beta_objective(neg, 2.0, 1.0, 0.0, 1.2));
  EXPECT_DOUBLE_EQ(drrl_beta_gradient(neg, 2.0, 1.0, 0.0, 1.0), 1.0);
}

TEST(MarginObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vec neg(6);
    for (auto& f : neg) f = u(rng);
    const double beta = 0.05 * t / 5.0 - 0.4;
    bool near_kink = false;
    for (double f : neg) near_kink |= std::abs(f - beta) < 1e-3;
    if (near_kink) continue;
    const double h = 1e-6;
    const double fd = (drrl_beta_objective(neg, 2.5, 1.3, 1e-8, beta + h) -
                       drrl_beta_objective(neg, 2.5, 1.3, 1e-8, beta - h)) /
                      (2 * h);
    const double an = drrl_beta_gradient(neg, 2.5, 1.3, 1e-8, beta);
    EXPECT_LE(std::abs(an - fd), 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(BetaStep, DescentAndUntouchedUsers) {
  MarginState m(3, 0.5);
  beta_step(m, {{1, 1.0}}, 0.01);
  EXPECT_DOUBLE_EQ(m(0), 0.5);
  EXPECT_DOUBLE_EQ(m(1), 0.49);
  EXPECT_DOUBLE_EQ(m(2), 0.5);
  EXPECT_THROW(beta_step(m, {{0, 1.0}}, -1.0), Error);
}

TEST(BetaStep, SharedMarginUsesOneSlot) {
  MarginState m(4, 0.2, true);
  EXPECT_EQ(m.values.size(), 1u);
  beta_step(m, {{0, 2.0}}, 0.1);
  EXPECT_DOUBLE_EQ(m(3), 0.0);
}

TEST(WorstCaseWeights, Example) {
  const auto w = drrl_worst_case_weights(Vec{0.9, 0.5, 0.1}, 2.0, 1.0, 0.4);
  const double denom = std::sqrt((0.25 + 0.01) / 3.0);
  EXPECT_NEAR(w.weights[0], 0.5 / denom, 1e-12);
  EXPECT_NEAR(w.weights[1], 0.1 / denom, 1e-12);
  EXPECT_EQ(w.weights[2], 0.0);
  EXPECT_NEAR(w.weights[0], 1.69842, 1e-5);
  EXPECT_NEAR(w.weights[1], 0.33968, 1e-5);
}

TEST(WorstCaseWeights, SymmetricAndDegenerate) {
  const auto w = drrl_worst_case_weights(Vec{0.7, 0.7, 0.7}, 3.0, 1.2, 0.1);
  EXPECT_NEAR(w.weights[0], w.weights[1], 1e-15);
  EXPECT_NEAR(w.weights[1], w.weights[2], 1e-15);
  EXPECT_TRUE(drrl_worst_case_weights(Vec{0.1, 0.2}, 2.0, 1.0, 0.5).degenerate);
  EXPECT_THROW(drrl_worst_case_weights(Vec{0.1}, 1.0, 1.0, 0.0), Error);
}

TEST(BatchLoss, SingletonAndDuplicatedUsers) {
  LossSpec spec;
  spec.kind = LossKind::kSoftmax;
  BatchSample one;
  one.pairs = {{0, 1}};
  one.n_neg = 2;
  one.negatives = {2, 3};
  one.false_negative_mask = {0, 0};
  BatchScores s1{{0.6}, {0.1, -0.2}, 2};
  MarginState margins(2, 0.0);
  const auto single = batch_loss(one, s1, spec, margins);
  EXPECT_NEAR(single.value, softmax_loss({Vec{0.6}, Vec{0.1, -0.2}}, 0.2).value, 1e-15);

  BatchSample two = one;
  two.pairs.push_back({1, 1});
  two.negatives = {2, 3, 2, 3};
  two.false_negative_mask = {0, 0, 0, 0};
  BatchScores s2{{0.6, 0.6}, {0.1, -0.2, 0.1, -0.2}, 2};
  EXPECT_NEAR(batch_loss(two, s2, spec, margins).value, single.value, 1e-15);
}

TEST(LossSpec, Validation) {
  LossSpec s;
  s.tau = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = LossSpec{};
  s.gamma_star = 0.5;
  EXPECT_THROW(s.validate(), Error);
  s = LossSpec{};
  s.gamma_star = 2.0;
  EXPECT_DOUBLE_EQ(s.gamma(), 2.0);
  s.gamma_star = 1.0;
  EXPECT_TRUE(std::isinf(s.gamma()));
  EXPECT_EQ(loss_from_string("drrl"), LossKind::kDrrl);
  EXPECT_THROW(loss_from_string("hinge"), Error);
}

}  // namespace
}  // namespace drrl
