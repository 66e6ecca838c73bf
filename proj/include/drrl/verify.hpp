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

// Numerical certification suites: primal/dual agreement, multiplier
// recovery, CCL and KL limits, loss degeneracy, finite-difference gradients,
// convexity in the margin, worst-case weight normalisation, conjugacy and
// ranking metrics. Every check reports its worst error against a tolerance.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"
#include "drrl/dro.hpp"
#include "drrl/graph_model.hpp"
#include "drrl/losses.hpp"
#include "drrl/metrics.hpp"
#include "drrl/trainer.hpp"

namespace drrl {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst error or gap observed
  double tolerance = 0.0;
  nlohmann::ordered_json detail;
};

struct VerifyOptions {
  std::uint64_t seed = 2026;
  int instances = 0;  // 0: suite default
  std::optional<std::size_t> n;
  std::optional<double> gamma;
  std::optional<double> eta;
  std::optional<double> tolerance;  // overrides the suite's main tolerance
};

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s = {"duality",   "lambda",     "ccl",
                                             "kl",        "degeneracy", "gradients",
                                             "convexity", "normalization",     "conjugate",
                                             "metrics"};
  return s;
}

/// A DRO instance together with its Renyi order.
struct OrderedInstance {
  DroInstance inst;
  double gamma = 2.0;
};

/// The standard random instance set: n in 4..10, scores uniform on [-1, 1],
/// gamma cycling over {1.5, 2, 3} and eta over {0.01, 0.1, 0.5}.
inline std::vector<OrderedInstance> standard_instances(const VerifyOptions& opt, int count) {
  static const double gammas[] = {1.5, 2.0, 3.0};
  static const double etas[] = {0.01, 0.1, 0.5};
  std::mt19937_64 rng(derive_seed(opt.seed, 100));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<OrderedInstance> out;
  for (int k = 0; k < count; ++k) {
    const std::size_t n = opt.n.value_or(4 + static_cast<std::size_t>(k % 7));
    OrderedInstance o;
    o.gamma = opt.gamma.value_or(gammas[k % 3]);
    o.inst.eta = opt.eta.value_or(etas[(k / 3) % 3]);
    o.inst.scores.resize(n);
    for (auto& f : o.inst.scores) f = unif(rng);
    out.push_back(std::move(o));
  }
  return out;
}

namespace detail {

inline CheckResult make_check(std::string suite, std::string name, double value, double tol,
                              nlohmann::ordered_json detail = {}) {
  CheckResult c;
  c.suite = std::move(suite);
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tol;
  c.passed = std::isfinite(value) && value <= tol;
  c.detail = std::move(detail);
  return c;
}

inline double rel_error(const Vec& analytic, const Vec& numeric) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    ref += numeric[k] * numeric[k];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-8);
}

inline Vec central_difference(const std::function<double(const Vec&)>& fn, Vec x, double h) {
  Vec g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double up = fn(x);
    x[k] = x0 - h;
    const double down = fn(x);
    x[k] = x0;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

inline std::vector<CheckResult> verify_duality(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-3);
  std::vector<CheckResult> out;
  int idx = 0;
  for (const auto& o : standard_instances(opt, opt.instances ? opt.instances : 200)) {
    const auto cert = solve_beta(o.inst, o.gamma, 1e-8);
    // Weak duality at arbitrary margins.
    std::mt19937_64 rng(derive_seed(opt.seed, 200 + static_cast<std::uint64_t>(idx)));
    std::uniform_real_distribution<double> beta_draw(-3.0, 1.0);
    double weak_violation = 0.0;
    for (int t = 0; t < 8; ++t) {
      weak_violation = std::max(weak_violation,
                                cert.primal_value - dual_value(o.inst, o.gamma, beta_draw(rng)));
    }
    nlohmann::ordered_json d;
    d["instance"] = idx;
    d["kind"] = "cressie_read";
    d["gamma"] = o.gamma;
    d["eta"] = o.inst.eta;
    d["scores"] = o.inst.scores;
    d["primal"] = cert.primal_value;
    d["dual"] = cert.dual_value;
    d["gap"] = cert.gap;
    d["q_star"] = cert.q_star;
    d["certificate"] = {{"beta_star", cert.beta_star},
                        {"lambda_star", cert.lambda_star},
                        {"rho_star", cert.rho_star},
                        {"at_boundary", cert.at_boundary}};
    d["weak_duality_violation"] = weak_violation;
    const double worst = std::max(cert.gap, weak_violation > 1e-6 ? kInf : 0.0);
    out.push_back(detail::make_check("duality", "instance_" + std::to_string(idx), worst, tol, d));
    ++idx;
  }
  return out;
}

inline std::vector<CheckResult> verify_lambda(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-6);
  std::vector<CheckResult> out;
  int idx = 0;
  for (const auto& o : standard_instances(opt, opt.instances ? opt.instances : 200)) {
    InnerMaxOptions skip;
    skip.restarts = 0;
    skip.grid_resolution = 0;
    const auto cert = solve_beta(o.inst, o.gamma, 1e-8, skip);
    const double lag = lagrangian_dual_value(o.inst, o.gamma, cert.lambda_star, cert.rho_star);
    const double err = std::abs(lag - cert.dual_value);
    out.push_back(detail::make_check("lambda", "instance_" + std::to_string(idx), err, tol,
                                     {{"gamma", o.gamma},
                                      {"eta", o.inst.eta},
                                      {"lambda_star", cert.lambda_star},
                                      {"rho_star", cert.rho_star},
                                      {"lagrangian", lag},
                                      {"golden_section_min", cert.dual_value}}));
    ++idx;
  }
  return out;
}

inline std::vector<CheckResult> verify_ccl(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-3);
  std::vector<CheckResult> out;
  std::mt19937_64 rng(derive_seed(opt.seed, 300));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int count = opt.instances ? opt.instances : 100;
  for (int k = 0; k < count; ++k) {
    DroInstance inst;
    inst.scores.resize(opt.n.value_or(4 + static_cast<std::size_t>(k % 7)));
    for (auto& f : inst.scores) f = unif(rng);
    const double n = static_cast<double>(inst.size());
    const int which = k % 3;
    const double alpha = which == 0 ? 1.0 : which == 1 ? 2.0 : n;
    const auto rep = verify_ccl_equivalence(inst, alpha);
    double err = rep.gap;
    double exact_tol = tol;
    if (which != 1) {
      const double target = which == 0 ? mean(inst.scores)
                                       : *std::max_element(inst.scores.begin(), inst.scores.end());
      err = std::max(std::abs(rep.primal - target), std::abs(rep.dual - target));
      exact_tol = std::min(tol, 1e-6);
    }
    out.push_back(detail::make_check("ccl", "instance_" + std::to_string(k), err, exact_tol,
                                     {{"alpha", alpha},
                                      {"scores", inst.scores},
                                      {"primal", rep.primal},
                                      {"dual", rep.dual},
                                      {"beta_star", rep.beta_star},
                                      {"gap", rep.gap}}));
  }
  return out;
}

inline std::vector<CheckResult> verify_kl(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-2);
  static const double etas[] = {0.01, 0.1, 0.5};
  std::vector<CheckResult> out;
  std::mt19937_64 rng(derive_seed(opt.seed, 400));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int count = opt.instances ? opt.instances : 50;
  for (int k = 0; k < count; ++k) {
    DroInstance inst;
    inst.scores.resize(opt.n.value_or(4 + static_cast<std::size_t>(k % 7)));
    for (auto& f : inst.scores) f = unif(rng);
    inst.eta = opt.eta.value_or(etas[k % 3]);
    std::vector<double> gaps;
    for (double g : {1.1, 1.01, 1.001}) gaps.push_back(verify_kl_limit(inst, g).relative_gap);
    const bool monotone = gaps[0] >= gaps[1] && gaps[1] >= gaps[2];
    out.push_back(detail::make_check("kl", "instance_" + std::to_string(k),
                                     monotone ? gaps[2] : kInf, tol,
                                     {{"eta", inst.eta},
                                      {"scores", inst.scores},
                                      {"relative_gap_gamma_1.1", gaps[0]},
                                      {"relative_gap_gamma_1.01", gaps[1]},
                                      {"relative_gap_gamma_1.001", gaps[2]},
                                      {"monotone", monotone}}));
  }
  return out;
}

inline std::vector<CheckResult> verify_degeneracy(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-12);
  std::mt19937_64 rng(derive_seed(opt.seed, 500));
  std::uniform_real_distribution<double> unif(-1.0, 1.0), a_draw(0.0, 5.0);
  std::uniform_int_distribution<int> len(1, 12);
  const int count = opt.instances ? opt.instances : 1000;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    Vec pos(static_cast<std::size_t>(len(rng))), neg(static_cast<std::size_t>(len(rng)));
    for (auto& f : pos) f = unif(rng);
    for (auto& f : neg) f = unif(rng);
    const double alpha = a_draw(rng) + 1e-3, beta = unif(rng);
    const UserLossInput in{pos, neg};
    const auto d = drrl_loss(in, 1.0, alpha, 0.0, beta);
    const auto c = ccl_loss(in, alpha, beta);
    worst = std::max(worst, std::abs(d.value - c.value));
    for (std::size_t j = 0; j < neg.size(); ++j) {
      worst = std::max(worst, std::abs(d.d_neg[j] - c.d_neg[j]));
    }
    for (std::size_t j = 0; j < pos.size(); ++j) {
      worst = std::max(worst, std::abs(d.d_pos[j] - c.d_pos[j]));
    }
  }
  return {detail::make_check("degeneracy", "drrl_gamma_star_1_equals_ccl", worst, tol,
                             {{"inputs", count}})};
}

namespace detail {

/// Random scores kept at least `gap` away from `beta` so finite differences
/// never straddle a kink.
inline Vec scores_away_from(std::mt19937_64& rng, std::size_t n, double beta, double gap) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec v(n);
  for (auto& f : v) {
    do {
      f = unif(rng);
    } while (std::abs(f - beta) < gap);
  }
  return v;
}

/// Small split with 4 users and 4 items; every node has an edge.
inline DatasetSplit toy_split(std::mt19937_64& rng) {
  DatasetSplit s;
  s.num_users = 4;
  s.num_items = 4;
  s.train.assign(4, {});
  s.validation.assign(4, {});
  s.test.assign(4, {});
  std::bernoulli_distribution edge(0.5);
  for (Index u = 0; u < 4; ++u) {
    for (Index i = 0; i < 4; ++i) {
      if (i == u || edge(rng)) s.train[static_cast<std::size_t>(u)].push_back(i);
    }
  }
  return s;
}

}  // namespace detail

inline std::vector<CheckResult> verify_gradients(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-4);
  const double h = 1e-5;
  std::vector<CheckResult> out;
  std::mt19937_64 rng(derive_seed(opt.seed, 600));
  const int reps = opt.instances ? opt.instances : 20;

  // Score-level gradients of every loss.
  std::vector<LossSpec> specs(6);
  specs[0].kind = LossKind::kMse;
  specs[1].kind = LossKind::kBce;
  specs[2].kind = LossKind::kBpr;
  specs[3].kind = LossKind::kSoftmax;
  specs[3].tau = 0.2;
  specs[4].kind = LossKind::kCcl;
  specs[4].alpha = 3.0;
  specs[4].beta = 0.3;
  specs[5].kind = LossKind::kDrrl;
  specs[5].gamma_star = 2.5;
  specs[5].c = 1.3;
  specs[5].eps = 1e-3;
  const double drrl_beta = 0.1;
  for (const auto& spec : specs) {
    double worst = 0.0;
    const double beta = spec.kind == LossKind::kCcl ? spec.beta : drrl_beta;
    for (int r = 0; r < reps; ++r) {
      Vec pos = detail::scores_away_from(rng, 3, beta, 1e-3);
      Vec neg = detail::scores_away_from(rng, 7, beta, 1e-3);
      Vec all = pos;
      all.insert(all.end(), neg.begin(), neg.end());
      auto value = [&](const Vec& x) {
        Vec p(x.begin(), x.begin() + 3), n(x.begin() + 3, x.end());
        return evaluate_loss(spec, {p, n}, beta).value;
      };
      const auto out_an = evaluate_loss(spec, {pos, neg}, beta);
      Vec analytic = out_an.d_pos;
      analytic.insert(analytic.end(), out_an.d_neg.begin(), out_an.d_neg.end());
      worst = std::max(worst, detail::rel_error(analytic, detail::central_difference(value, all, h)));
    }
    out.push_back(detail::make_check("gradients", "loss_" + to_string(spec.kind), worst, tol));
  }

  // Margin objective.
  {
    double worst = 0.0;
    std::uniform_real_distribution<double> gs(1.0, 4.0), cd(0.5, 2.5), bd(-0.8, 0.8);
    for (int r = 0; r < reps * 5; ++r) {
      const double gamma_star = gs(rng), c = cd(rng), beta = bd(rng);
      const Vec neg = detail::scores_away_from(rng, 8, beta, 1e-3);
      const double an = drrl_beta_gradient(neg, gamma_star, c, 1e-6, beta);
      const double num = (drrl_beta_objective(neg, gamma_star, c, 1e-6, beta + h) -
                          drrl_beta_objective(neg, gamma_star, c, 1e-6, beta - h)) /
                         (2.0 * h);
      worst = std::max(worst, std::abs(an - num) / std::max(std::abs(num), 1e-8));
    }
    out.push_back(detail::make_check("gradients", "margin_objective", worst, tol));
  }

  // Full chain: raw embeddings -> backbone -> cosine -> batch loss.
  for (auto kind : {BackboneKind::kMf, BackboneKind::kLightGcn, BackboneKind::kXSimGcl}) {
    for (const auto& spec : {specs[2], specs[3], specs[5]}) {
      double worst = 0.0;
      for (int r = 0; r < std::max(1, reps / 4); ++r) {
        const auto split = detail::toy_split(rng);
        const auto graph = InteractionGraph::from_split(split);
        BackboneConfig bb;
        bb.kind = kind;
        bb.layers = 2;
        bb.contrast_layer = 1;
        bb.infonce_weight = 0.1;
        EmbeddingTable table(4, 4, 3);
        init_normal(table, 0.5, rng);
        MarginState margins(4, drrl_beta);
        const auto pairs = train_pairs(split);
        std::mt19937_64 brng(derive_seed(opt.seed, 601 + static_cast<std::uint64_t>(r)));
        const auto batch = sample_batch(split, pairs, 4, 3, NoiseConfig{}, brng);
        const std::uint64_t noise_seed = derive_seed(opt.seed, 700 + static_cast<std::uint64_t>(r));
        auto loss_at = [&](const Vec& values, BatchGradients* grads) {
          EmbeddingTable t = table;
          t.values = values;
          std::mt19937_64 nrng(noise_seed);
          const auto fwd = forward(t, graph, bb, nrng);
          const auto scores = score_batch(batch, fwd.final);
          auto bg = batch_gradients(fwd, scores, batch, graph, bb, spec, margins);
          if (grads) *grads = bg;
          return bg.loss;
        };
        BatchGradients an;
        loss_at(table.values, &an);
        const auto num = detail::central_difference(
            [&](const Vec& v) { return loss_at(v, nullptr); }, table.values, h);
        worst = std::max(worst, detail::rel_error(an.grads.values, num));
      }
      out.push_back(detail::make_check(
          "gradients", "chain_" + to_string(kind) + "_" + to_string(spec.kind), worst, tol));
    }
  }

  // InfoNCE on its own.
  {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
      std::normal_distribution<double> nd(0.0, 1.0);
      const std::size_t n = 4, d = 3;
      Vec x(2 * n * d);
      for (auto& v : x) v = nd(rng);
      auto views = [&](const Vec& v, std::vector<std::span<const double>>& a,
                       std::vector<std::span<const double>>& b) {
        for (std::size_t k = 0; k < n; ++k) {
          a.emplace_back(v.data() + k * d, d);
          b.emplace_back(v.data() + (n + k) * d, d);
        }
      };
      auto value = [&](const Vec& v) {
        std::vector<std::span<const double>> a, b;
        views(v, a, b);
        return infonce_auxiliary(a, b, 0.2, 0.5).loss;
      };
      std::vector<std::span<const double>> a, b;
      views(x, a, b);
      const auto res = infonce_auxiliary(a, b, 0.2, 0.5);
      Vec analytic;
      for (const auto& g : res.grad_first) analytic.insert(analytic.end(), g.begin(), g.end());
      for (const auto& g : res.grad_second) analytic.insert(analytic.end(), g.begin(), g.end());
      worst = std::max(worst, detail::rel_error(analytic, detail::central_difference(value, x, h)));
    }
    out.push_back(detail::make_check("gradients", "infonce", worst, tol));
  }
  return out;
}

inline std::vector<CheckResult> verify_convexity(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-10);
  std::mt19937_64 rng(derive_seed(opt.seed, 800));
  std::uniform_real_distribution<double> unif(-1.0, 1.0), gs(1.0, 5.0), cd(0.5, 3.0),
      bd(-3.0, 2.0);
  std::uniform_int_distribution<int> len(2, 10);
  const double eps_values[] = {0.0, 1e-10, 1e-3};
  const int count = opt.instances ? opt.instances : 1000;
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    Vec neg(static_cast<std::size_t>(len(rng)));
    for (auto& f : neg) f = unif(rng);
    const double gamma_star = gs(rng), c = cd(rng), eps = eps_values[k % 3];
    const double a = bd(rng), b = bd(rng);
    auto h = [&](double beta) { return drrl_beta_objective(neg, gamma_star, c, eps, beta); };
    worst = std::max(worst, h(0.5 * (a + b)) - 0.5 * (h(a) + h(b)));
  }
  return {detail::make_check("convexity", "margin_objective_midpoint", std::max(worst, 0.0), tol,
                             {{"triples", count}, {"max_violation", worst}})};
}

inline std::vector<CheckResult> verify_normalization(const VerifyOptions& opt) {
  const double tol = opt.tolerance.value_or(1e-3);
  std::vector<CheckResult> out;
  int idx = 0;
  for (const auto& o : standard_instances(opt, opt.instances ? opt.instances : 200)) {
    const auto cert = solve_beta(o.inst, o.gamma, 1e-8);
    double mass = 0.0;
    for (double q : cert.q_star) mass += q;
    const double expected = dot(cert.q_star, o.inst.scores);
    const double err = std::max(std::abs(mass - 1.0), std::abs(expected - cert.primal_value));
    out.push_back(detail::make_check("normalization", "instance_" + std::to_string(idx), err, tol,
                                     {{"gamma", o.gamma},
                                      {"eta", o.inst.eta},
                                      {"sum_q", mass},
                                      {"expected_score", expected},
                                      {"primal", cert.primal_value}}));
    ++idx;
  }
  std::mt19937_64 rng(derive_seed(opt.seed, 900));
  std::uniform_real_distribution<double> unif(-1.0, 1.0), td(0.05, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vec s(1 + static_cast<std::size_t>(k % 50));
    for (auto& f : s) f = unif(rng);
    worst = std::max(worst, std::abs(mean(sl_worst_case_weights(s, td(rng))) - 1.0));
  }
  out.push_back(detail::make_check("normalization", "sl_weights_mean_one", worst, 1e-12));
  return out;
}

inline std::vector<CheckResult> verify_conjugate(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  double worst = 0.0;
  for (double g : {1.5, 2.0, 3.0}) {
    for (int xi = 0; xi <= 20; ++xi) {
      const double x = -1.0 + 0.1 * xi;
      double best = -kInf;
      for (int ti = 0; ti <= 100000; ++ti) {
        const double t = 1e-4 * ti;
        best = std::max(best, x * t - phi_gamma(t, g));
      }
      worst = std::max(worst, std::abs(best - phi_conjugate(x, g)));
    }
  }
  out.push_back(detail::make_check("conjugate", "grid_conjugacy", worst,
                                   opt.tolerance.value_or(1e-4)));
  std::mt19937_64 rng(derive_seed(opt.seed, 1000));
  std::uniform_real_distribution<double> xd(-5.0, 5.0), td(0.0, 10.0), gd(1.01, 6.0);
  double violation = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double x = xd(rng), t = td(rng), g = gd(rng);
    violation = std::max(violation, x * t - phi_gamma(t, g) - phi_conjugate(x, g));
  }
  out.push_back(detail::make_check("conjugate", "fenchel_young", std::max(violation, 0.0), 1e-10));
  return out;
}

/// Reference ranking: full stable sort of the candidates.
inline std::pair<double, double> reference_recall_ndcg(const RankingInstance& inst,
                                                       std::size_t k) {
  std::vector<Index> order;
  for (Index i = 0; i < static_cast<Index>(inst.scores.size()); ++i) {
    if (std::find(inst.excluded.begin(), inst.excluded.end(), i) == inst.excluded.end()) {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return inst.scores[a] > inst.scores[b]; });
  double hits = 0.0, dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    if (std::find(inst.truth.begin(), inst.truth.end(), order[r]) != inst.truth.end()) {
      hits += 1.0;
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  for (std::size_t r = 0; r < std::min(k, inst.truth.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return {hits / static_cast<double>(inst.truth.size()), dcg / idcg};
}

inline std::vector<CheckResult> verify_metrics(const VerifyOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, 1100));
  std::uniform_int_distribution<int> items_d(2, 50), k_d(1, 10), level(0, 9);
  const int count = opt.instances ? opt.instances : 100;
  double worst = 0.0;
  for (int t = 0; t < count; ++t) {
    const int n = items_d(rng);
    Vec scores(static_cast<std::size_t>(n));
    for (auto& s : scores) s = 0.1 * level(rng);  // coarse levels force ties
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int n_ex = std::uniform_int_distribution<int>(0, n / 3)(rng);
    const int n_truth = std::uniform_int_distribution<int>(1, std::max(1, n - n_ex))(rng);
    std::vector<Index> ex(perm.begin(), perm.begin() + n_ex);
    std::vector<Index> truth(perm.begin() + n_ex,
                             perm.begin() + std::min(n, n_ex + n_truth));
    std::sort(ex.begin(), ex.end());
    std::sort(truth.begin(), truth.end());
    const RankingInstance inst{scores, ex, truth};
    const auto k = static_cast<std::size_t>(k_d(rng));
    const auto [r_ref, n_ref] = reference_recall_ndcg(inst, k);
    worst = std::max(worst, std::abs(*recall_at_k(inst, k) - r_ref));
    worst = std::max(worst, std::abs(*ndcg_at_k(inst, k) - n_ref));
  }
  return {detail::make_check("metrics", "reference_agreement", worst,
                             opt.tolerance.value_or(0.0), {{"instances", count}})};
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                                 const VerifyOptions& opt) {
  if (suite == "duality") return verify_duality(opt);
  if (suite == "lambda") return verify_lambda(opt);
  if (suite == "ccl") return verify_ccl(opt);
  if (suite == "kl") return verify_kl(opt);
  if (suite == "degeneracy") return verify_degeneracy(opt);
  if (suite == "gradients") return verify_gradients(opt);
  if (suite == "convexity") return verify_convexity(opt);
  if (suite == "normalization") return verify_normalization(opt);
  if (suite == "conjugate") return verify_conjugate(opt);
  if (suite == "metrics") return verify_metrics(opt);
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (const auto& s : verify_suites()) {
      auto part = run_verify_suite(s, opt);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  throw Error("unknown verify suite '" + suite + "'");
}

inline nlohmann::ordered_json to_json(const CheckResult& c) {
  nlohmann::ordered_json j;
  j["suite"] = c.suite;
  j["check"] = c.name;
  j["passed"] = c.passed;
  j["value"] = std::isfinite(c.value) ? nlohmann::ordered_json(c.value) : nlohmann::ordered_json("inf");
  j["tolerance"] = c.tolerance;
  if (!c.detail.is_null()) j["detail"] = c.detail;
  return j;
}

}  // namespace drrl
