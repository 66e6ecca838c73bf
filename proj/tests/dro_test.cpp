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
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "drrl/dro.hpp"

namespace drrl {
namespace {

DroInstance random_instance(std::uint64_t seed, std::size_t n, double eta) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DroInstance inst;
  inst.scores.resize(n);
  for (auto& f : inst.scores) f = u(rng);
  inst.eta = eta;
  return inst;
}

TEST(Divergence, ZeroAtBase) {
  const Vec p{0.25, 0.25, 0.5};
  EXPECT_NEAR(divergence(p, p, Divergence::kl()), 0.0, 1e-15);
  EXPECT_NEAR(divergence(p, p, Divergence::worst_regret()), 0.0, 1e-15);
  EXPECT_NEAR(divergence(p, p, Divergence::cressie_read(2.0)), 0.0, 1e-15);
}

TEST(Divergence, MassOutsideSupportIsInfinite) {
  const Vec p{0.5, 0.5, 0.0}, q{0.4, 0.4, 0.2};
  EXPECT_TRUE(std::isinf(divergence(q, p, Divergence::kl())));
  EXPECT_TRUE(std::isinf(divergence(q, p, Divergence::cressie_read(3.0))));
}

TEST(Divergence, KnownValues) {
  const Vec p{0.5, 0.5}, q{1.0, 0.0};
  EXPECT_NEAR(divergence(q, p, Divergence::kl()), std::log(2.0), 1e-15);
  EXPECT_NEAR(divergence(q, p, Divergence::worst_regret()), std::log(2.0), 1e-15);
  // Chi-square form at gamma = 2: mean((t - 1)^2) / 2 with t = (2, 0).
  EXPECT_NEAR(divergence(q, p, Divergence::cressie_read(2.0)), 0.5, 1e-15);
}

TEST(CGamma, Examples) {
  EXPECT_DOUBLE_EQ(c_gamma(0.0, 2.7), 1.0);
  EXPECT_NEAR(c_gamma(1.5, 2.0), 2.0, 1e-15);
  EXPECT_NEAR(c_gamma(0.5, 3.0), std::cbrt(4.0), 1e-15);
  EXPECT_NEAR(c_gamma(0.5, 3.0), 1.58740, 1e-5);
  EXPECT_THROW(c_gamma(-0.1, 2.0), Error);
}

TEST(Conjugate, MatchesGridSupremum) {
  for (double g : {1.5, 2.0, 4.0}) {
    for (double x : {-2.0, -0.5, 0.0, 0.3, 1.0}) {
      double best = -kInf;
      for (int k = 0; k <= 200000; ++k) best = std::max(best, x * k * 1e-4 - phi_gamma(k * 1e-4, g));
      EXPECT_NEAR(best, phi_conjugate(x, g), 1e-6) << "gamma " << g << " x " << x;
    }
  }
}

TEST(InnerMax, ZeroRadiusGivesMean) {
  auto inst = random_instance(1, 6, 0.0);
  for (const auto& d : {Divergence::kl(), Divergence::cressie_read(2.0)}) {
    const auto r = inner_max_bruteforce(inst, d);
    EXPECT_NEAR(r.value, mean(inst.scores), 1e-12);
    for (double q : r.q) EXPECT_NEAR(q, 1.0 / 6.0, 1e-12);
  }
}

TEST(InnerMax, PointMassFeasibleAtLogTwo) {
  DroInstance inst{{1.0, 0.0}, std::log(2.0)};
  const auto r = inner_max_bruteforce(inst, Divergence::kl());
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_NEAR(r.q[0], 1.0, 1e-9);
  EXPECT_NEAR(r.q[1], 0.0, 1e-9);
}

TEST(InnerMax, SolutionIsFeasibleAndBeatsRandomFeasiblePoints) {
  const auto inst = random_instance(7, 5, 0.1);
  const auto div = Divergence::cressie_read(2.0);
  const auto r = inner_max_bruteforce(inst, div);
  EXPECT_LE(r.achieved_divergence, inst.eta + 1e-9);
  EXPECT_NEAR(std::accumulate(r.q.begin(), r.q.end(), 0.0), 1.0, 1e-12);
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> gd(1.0, 1.0);
  const Vec p = inst.base();
  int feasible = 0;
  for (int t = 0; t < 20000; ++t) {
    Vec q(5);
    double s = 0.0;
    for (auto& x : q) s += (x = gd(rng));
    for (auto& x : q) x /= s;
    if (divergence(q, p, div) > inst.eta) continue;
    ++feasible;
    EXPECT_LE(dot(q, inst.scores), r.value + 1e-9);
  }
  EXPECT_GT(feasible, 0);
}

TEST(InnerMax, RejectsLargeOrEmptyInstances) {
  EXPECT_THROW(inner_max_bruteforce(random_instance(1, 13, 0.1), Divergence::kl()), Error);
  EXPECT_THROW(inner_max_bruteforce(DroInstance{}, Divergence::kl()), Error);
}

TEST(GoldenSection, FindsQuadraticMinimum) {
  const double x = golden_section_minimize([](double b) { return (b - 0.3) * (b - 0.3); }, -2.0,
                                           2.0, 1e-10);
  EXPECT_NEAR(x, 0.3, 1e-8);
}

TEST(GoldenSection, WidensBelowTheBracket) {
  const auto m = minimize_convex_below([](double b) { return (b + 7.0) * (b + 7.0); }, -1.0, 1.0,
                                       1e-10);
  EXPECT_NEAR(m.arg, -7.0, 1e-6);
  EXPECT_FALSE(m.at_boundary);
  const auto lin = minimize_convex_below([](double b) { return b; }, -1.0, 1.0, 1e-8, 5);
  EXPECT_TRUE(lin.at_boundary);
}

TEST(DualValue, Examples) {
  const DroInstance inst{{0.9, 0.5, 0.1}, 0.0};
  EXPECT_NEAR(dual_value(inst, 2.0, 0.4), 0.69439, 1e-5);
  EXPECT_DOUBLE_EQ(dual_value(inst, 2.0, 1.5), 1.5);
}

TEST(DualValue, ZeroRadiusMinimumApproachesMean) {
  const auto inst = random_instance(4, 6, 0.0);
  const auto cert = solve_beta(inst, 2.0, 1e-8);
  EXPECT_NEAR(cert.dual_value, mean(inst.scores), 1e-3);
  EXPECT_NEAR(cert.primal_value, mean(inst.scores), 1e-12);
}

TEST(SolveBeta, ConstantScores) {
  const DroInstance inst{{0.3, 0.3, 0.3, 0.3}, 0.2};
  const auto cert = solve_beta(inst, 2.0, 1e-8);
  EXPECT_LE(cert.beta_star, 0.3 + 1e-9);
  EXPECT_NEAR(cert.dual_value, 0.3, 1e-6);
}

TEST(SolveBeta, RandomInstanceGap) {
  const auto inst = random_instance(2026, 6, 0.1);
  const auto cert = solve_beta(inst, 2.0, 1e-8);
  EXPECT_LE(std::abs(cert.dual_value - cert.primal_value), 1e-3);
  // Multiplier recovery.
  EXPECT_NEAR(lagrangian_dual_value(inst, 2.0, cert.lambda_star, cert.rho_star), cert.dual_value,
              1e-6);
  EXPECT_NEAR(cert.rho_star, cert.beta_star + cert.lambda_star, 1e-15);
}

TEST(SolveBeta, WeakDualityEverywhere) {
  const auto inst = random_instance(9, 7, 0.5);
  const auto cert = solve_beta(inst, 3.0, 1e-8);
  for (double b = -3.0; b <= 1.0; b += 0.05) {
    EXPECT_GE(dual_value(inst, 3.0, b), cert.primal_value - 1e-9);
  }
}

TEST(SolveBeta, WorstCaseDistributionIsNormalised) {
  const auto inst = random_instance(12, 8, 0.1);
  const auto cert = solve_beta(inst, 1.5, 1e-8);
  EXPECT_NEAR(std::accumulate(cert.q_star.begin(), cert.q_star.end(), 0.0), 1.0, 1e-3);
  EXPECT_NEAR(dot(cert.q_star, inst.scores), cert.primal_value, 1e-3);
}

TEST(CclEquivalence, Examples) {
  const auto inst = random_instance(5, 5, 0.0);
  const auto at_one = verify_ccl_equivalence(inst, 1.0);
  EXPECT_NEAR(at_one.primal, mean(inst.scores), 1e-6);
  EXPECT_NEAR(at_one.dual, mean(inst.scores), 1e-6);
  const double fmax = *std::max_element(inst.scores.begin(), inst.scores.end());
  const auto at_n = verify_ccl_equivalence(inst, 5.0);
  EXPECT_NEAR(at_n.primal, fmax, 1e-6);
  EXPECT_NEAR(at_n.dual, fmax, 1e-6);
  EXPECT_LE(verify_ccl_equivalence(inst, 2.0).gap, 1e-3);
  EXPECT_THROW(verify_ccl_equivalence(inst, 0.5), Error);
}

TEST(KlLimit, Examples) {
  const auto zero = verify_kl_limit(random_instance(3, 6, 0.0), 1.01);
  EXPECT_NEAR(zero.cressie_read, zero.kl, 1e-12);
  EXPECT_LE(verify_kl_limit(random_instance(3, 6, 0.1), 1.001).relative_gap, 1e-2);
}

TEST(SolveMargin, MatchesScanMinimum) {
  const Vec neg{0.8, 0.4, 0.1, -0.2, -0.5};
  const auto m = solve_margin(neg, 2.0, 1.5, 0.0);
  double best = kInf;
  for (double b = -3.0; b <= 1.0; b += 1e-4) best = std::min(best, drrl_beta_objective(neg, 2.0, 1.5, 0.0, b));
  EXPECT_NEAR(m.value, best, 1e-7);
  EXPECT_FALSE(m.at_boundary);
}

TEST(SolveMargin, UnboundedBelowWhenCAtMostOne) {
  const Vec neg{0.8, 0.4, 0.1};
  EXPECT_TRUE(solve_margin(neg, 2.0, 1.0, 0.0).at_boundary);
}

}  // namespace
}  // namespace drrl
