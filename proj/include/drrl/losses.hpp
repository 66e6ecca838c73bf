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

// Recommendation losses over prediction scores, with analytic gradients, and
// the learnable per-user margins of the Renyi-DRO loss.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"

namespace drrl {

enum class LossKind { kMse, kBce, kBpr, kSoftmax, kCcl, kDrrl };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kMse: return "mse";
    case LossKind::kBce: return "bce";
    case LossKind::kBpr: return "bpr";
    case LossKind::kSoftmax: return "sl";
    case LossKind::kCcl: return "ccl";
    case LossKind::kDrrl: return "drrl";
  }
  return "mse";
}

inline LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "bce") return LossKind::kBce;
  if (s == "bpr") return LossKind::kBpr;
  if (s == "sl" || s == "softmax") return LossKind::kSoftmax;
  if (s == "ccl") return LossKind::kCcl;
  if (s == "drrl") return LossKind::kDrrl;
  throw Error("unknown loss '" + s + "' (expected mse|bce|bpr|sl|ccl|drrl)");
}

/// How DrRL margins are learned: one per user, one shared by everybody, or
/// frozen at their initial value.
enum class MarginMode { kPersonalized, kShared, kFixed };

inline std::string to_string(MarginMode m) {
  switch (m) {
    case MarginMode::kPersonalized: return "personalized";
    case MarginMode::kShared: return "shared";
    case MarginMode::kFixed: return "fixed";
  }
  return "personalized";
}

inline MarginMode margin_mode_from_string(const std::string& s) {
  if (s == "personalized") return MarginMode::kPersonalized;
  if (s == "shared") return MarginMode::kShared;
  if (s == "fixed") return MarginMode::kFixed;
  throw Error("unknown margin mode '" + s + "' (expected personalized|shared|fixed)");
}

/// Loss family plus parameters. The Renyi order is stored as its conjugate
/// exponent gamma_star = gamma / (gamma - 1); gamma_star == 1 is the CCL limit.
struct LossSpec {
  LossKind kind = LossKind::kSoftmax;
  double tau = 0.2;
  double alpha = 1.0;
  double beta = 0.5;
  double gamma_star = 2.0;
  double c = 1.0;
  double eps = 1e-10;
  double beta0 = 0.5;
  double lr_beta = 1e-4;
  MarginMode margin_mode = MarginMode::kPersonalized;

  /// Renyi order gamma; +inf when gamma_star == 1.
  double gamma() const {
    return gamma_star > 1.0 ? gamma_star / (gamma_star - 1.0)
                            : std::numeric_limits<double>::infinity();
  }

  void validate() const {
    if (!(tau > 0.0)) throw Error("tau must be > 0");
    if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
    if (!(gamma_star >= 1.0)) throw Error("gamma_star must be >= 1");
    if (!(c > 0.0)) throw Error("c must be > 0");
    if (!(eps >= 0.0)) throw Error("eps must be >= 0");
    if (!(lr_beta >= 0.0)) throw Error("lr_beta must be >= 0");
  }
};

/// Per-user DrRL margins. In shared mode a single value serves every user.
struct MarginState {
  std::vector<double> values;
  bool shared = false;

  MarginState() = default;
  MarginState(Index num_users, double beta0, bool shared_margin = false)
      : values(shared_margin ? 1 : static_cast<std::size_t>(num_users), beta0),
        shared(shared_margin) {}

  double operator()(Index user) const {
    return values[shared ? 0 : static_cast<std::size_t>(user)];
  }
  double& slot(Index user) { return values[shared ? 0 : static_cast<std::size_t>(user)]; }
};

struct UserLossInput {
  std::span<const double> pos_scores;
  std::span<const double> neg_scores;
};

struct LossOutput {
  double value = 0.0;
  Vec d_pos;
  Vec d_neg;
};

namespace detail {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void require_positives(const UserLossInput& in) {
  if (in.pos_scores.empty()) throw Error("loss needs at least one positive score");
}

inline void require_negatives(const UserLossInput& in) {
  if (in.neg_scores.empty()) throw Error("loss needs at least one negative score");
}

inline LossOutput shaped(const UserLossInput& in) {
  return {0.0, Vec(in.pos_scores.size(), 0.0), Vec(in.neg_scores.size(), 0.0)};
}

/// -mean(f+) and its gradient; shared by CCL and DrRL.
inline void add_linear_positive_term(const UserLossInput& in, LossOutput& out,
                                     double scale = 1.0) {
  const double n = static_cast<double>(in.pos_scores.size());
  out.value -= scale * mean(in.pos_scores);
  for (auto& g : out.d_pos) g = -scale / n;
}

}  // namespace detail

/// Point-wise squared error towards 1 for positives and 0 for negatives.
inline LossOutput mse_loss(const UserLossInput& in) {
  detail::require_positives(in);
  auto out = detail::shaped(in);
  const double np = static_cast<double>(in.pos_scores.size());
  const double nn = static_cast<double>(in.neg_scores.size());
  for (std::size_t k = 0; k < in.pos_scores.size(); ++k) {
    const double r = in.pos_scores[k] - 1.0;
    out.value += r * r / np;
    out.d_pos[k] = 2.0 * r / np;
  }
  for (std::size_t k = 0; k < in.neg_scores.size(); ++k) {
    const double f = in.neg_scores[k];
    out.value += f * f / nn;
    out.d_neg[k] = 2.0 * f / nn;
  }
  return out;
}

/// Binary cross-entropy with logistic link.
inline LossOutput bce_loss(const UserLossInput& in) {
  detail::require_positives(in);
  auto out = detail::shaped(in);
  const double np = static_cast<double>(in.pos_scores.size());
  const double nn = static_cast<double>(in.neg_scores.size());
  for (std::size_t k = 0; k < in.pos_scores.size(); ++k) {
    const double f = in.pos_scores[k];
    out.value += detail::softplus(-f) / np;
    out.d_pos[k] = -detail::sigmoid(-f) / np;
  }
  for (std::size_t k = 0; k < in.neg_scores.size(); ++k) {
    const double f = in.neg_scores[k];
    out.value += detail::softplus(f) / nn;
    out.d_neg[k] = detail::sigmoid(f) / nn;
  }
  return out;
}

/// Mean over all (positive, negative) pairs of -log sigmoid(f+ - f-).
inline LossOutput bpr_loss(const UserLossInput& in) {
  detail::require_positives(in);
  detail::require_negatives(in);
  auto out = detail::shaped(in);
  const double pairs = static_cast<double>(in.pos_scores.size() * in.neg_scores.size());
  for (std::size_t a = 0; a < in.pos_scores.size(); ++a) {
    for (std::size_t b = 0; b < in.neg_scores.size(); ++b) {
      const double diff = in.pos_scores[a] - in.neg_scores[b];
      out.value += detail::softplus(-diff) / pairs;
      const double g = detail::sigmoid(-diff) / pairs;
      out.d_pos[a] -= g;
      out.d_neg[b] += g;
    }
  }
  return out;
}

/// Softmax loss in its negatives-only form:
///   -mean(f+)/tau + log sum_j exp(f_j/tau).
inline LossOutput softmax_loss(const UserLossInput& in, double tau) {
  detail::require_positives(in);
  detail::require_negatives(in);
  if (!(tau > 0.0)) throw Error("tau must be > 0");
  auto out = detail::shaped(in);
  const double np = static_cast<double>(in.pos_scores.size());
  out.value = -mean(in.pos_scores) / tau;
  for (auto& g : out.d_pos) g = -1.0 / (tau * np);
  const double mx = *std::max_element(in.neg_scores.begin(), in.neg_scores.end()) / tau;
  double z = 0.0;
  for (std::size_t k = 0; k < in.neg_scores.size(); ++k) {
    out.d_neg[k] = std::exp(in.neg_scores[k] / tau - mx);
    z += out.d_neg[k];
  }
  out.value += mx + std::log(z);
  for (auto& g : out.d_neg) g /= z * tau;
  return out;
}

/// Worst-case KL weights exp(f_j/tau) / mean_k exp(f_k/tau); mean(w) == 1.
inline Vec sl_worst_case_weights(std::span<const double> neg_scores, double tau) {
  if (neg_scores.empty()) return {};
  const double mx = *std::max_element(neg_scores.begin(), neg_scores.end());
  Vec w(neg_scores.size());
  double z = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::exp((neg_scores[k] - mx) / tau);
    z += w[k];
  }
  const double scale = static_cast<double>(w.size()) / z;
  for (auto& x : w) x *= scale;
  return w;
}

/// Cosine contrastive loss: -mean(f+) + alpha/n- * sum_j (f_j - beta)_+.
/// Subgradient 0 at f_j == beta.
inline LossOutput ccl_loss(const UserLossInput& in, double alpha, double beta) {
  detail::require_positives(in);
  if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
  auto out = detail::shaped(in);
  detail::add_linear_positive_term(in, out);
  if (in.neg_scores.empty()) return out;
  const double nn = static_cast<double>(in.neg_scores.size());
  for (std::size_t k = 0; k < in.neg_scores.size(); ++k) {
    const double excess = in.neg_scores[k] - beta;
    if (excess > 0.0) {
      out.value += alpha * excess / nn;
      out.d_neg[k] = alpha / nn;
    }
  }
  return out;
}

namespace detail {

/// Negative part of the DrRL loss, M(beta) = (mean_j t_j^p)^(1/p) with
/// t_j = c (f_j - beta)_+ + eps, plus dM/df_j.
struct RenyiTerm {
  double value = 0.0;
  Vec d_scores;
  double d_beta = 0.0;
};

inline RenyiTerm renyi_term(std::span<const double> scores, double gamma_star, double c,
                            double eps, double beta) {
  if (scores.empty()) throw Error("DrRL needs at least one negative score");
  if (!(gamma_star >= 1.0)) throw Error("gamma_star must be >= 1");
  if (!(c > 0.0)) throw Error("c must be > 0");
  if (!(eps >= 0.0)) throw Error("eps must be >= 0");
  const double n = static_cast<double>(scores.size());
  const double p = gamma_star;
  RenyiTerm r;
  r.d_scores.assign(scores.size(), 0.0);
  // Factor out the largest term so t^p cannot overflow for large p.
  double tmax = 0.0;
  for (double f : scores) tmax = std::max(tmax, c * positive_part(f - beta) + eps);
  if (tmax == 0.0) return r;  // full truncation with eps == 0: M = 0, zero gradient
  double s = 0.0;
  for (double f : scores) s += std::pow((c * positive_part(f - beta) + eps) / tmax, p);
  const double m = tmax * std::pow(s / n, 1.0 / p);
  r.value = m;
  double sum_active = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] > beta) {
      const double t = c * (scores[k] - beta) + eps;
      r.d_scores[k] = std::pow(t / m, p - 1.0) * c / n;
      sum_active += r.d_scores[k];
    }
  }
  r.d_beta = -sum_active;
  return r;
}

}  // namespace detail

/// DrRL loss with margin beta_u:
///   -mean(f+) + (mean_j [c (f_j - beta_u)_+ + eps]^gamma_star)^(1/gamma_star).
inline LossOutput drrl_loss(const UserLossInput& in, double gamma_star, double c, double eps,
                            double beta_u) {
  detail::require_positives(in);
  auto out = detail::shaped(in);
  detail::add_linear_positive_term(in, out);
  auto term = detail::renyi_term(in.neg_scores, gamma_star, c, eps, beta_u);
  out.value += term.value;
  out.d_neg = std::move(term.d_scores);
  return out;
}

/// Margin objective beta + M(beta); convex in beta.
inline double drrl_beta_objective(std::span<const double> neg_scores, double gamma_star,
                                  double c, double eps, double beta) {
  return beta + detail::renyi_term(neg_scores, gamma_star, c, eps, beta).value;
}

/// d/d beta of drrl_beta_objective.
inline double drrl_beta_gradient(std::span<const double> neg_scores, double gamma_star,
                                 double c, double eps, double beta) {
  return 1.0 + detail::renyi_term(neg_scores, gamma_star, c, eps, beta).d_beta;
}

/// Gradient-descent step on the margins of the users present in `grads`.
inline void beta_step(MarginState& state, const std::map<Index, double>& grads,
                      double lr_beta) {
  if (!(lr_beta >= 0.0)) throw Error("lr_beta must be >= 0");
  for (const auto& [user, g] : grads) state.slot(user) -= lr_beta * g;
}

struct WorstCaseWeights {
  Vec weights;
  bool degenerate = false;  // every score <= beta
};

/// Worst-case Cressie-Read weights for Renyi order gamma > 1:
///   w_j = c (f_j - beta)_+^(1/(gamma-1)) / (mean_k (f_k - beta)_+^gamma_star)^(1/gamma).
/// Their mean is 1 when beta minimises the margin objective.
inline WorstCaseWeights drrl_worst_case_weights(std::span<const double> neg_scores,
                                                double gamma, double c, double beta) {
  if (!(gamma > 1.0)) throw Error("gamma must be > 1");
  const double p = gamma / (gamma - 1.0);
  WorstCaseWeights r{Vec(neg_scores.size(), 0.0), false};
  double tmax = 0.0;
  for (double f : neg_scores) tmax = std::max(tmax, positive_part(f - beta));
  if (tmax == 0.0) {
    r.degenerate = true;
    return r;
  }
  double s = 0.0;
  for (double f : neg_scores) s += std::pow(positive_part(f - beta) / tmax, p);
  s /= static_cast<double>(neg_scores.size());
  // (tmax^p s)^(1/gamma) = tmax^(p-1) s^(1/gamma) since p / gamma = p - 1.
  const double denom = std::pow(s, 1.0 / gamma);
  for (std::size_t k = 0; k < neg_scores.size(); ++k) {
    r.weights[k] = c * std::pow(positive_part(neg_scores[k] - beta) / tmax, p - 1.0) / denom;
  }
  return r;
}

/// Dispatches one per-user loss.
inline LossOutput evaluate_loss(const LossSpec& spec, const UserLossInput& in,
                                double beta_u) {
  switch (spec.kind) {
    case LossKind::kMse: return mse_loss(in);
    case LossKind::kBce: return bce_loss(in);
    case LossKind::kBpr: return bpr_loss(in);
    case LossKind::kSoftmax: return softmax_loss(in, spec.tau);
    case LossKind::kCcl: return ccl_loss(in, spec.alpha, spec.beta);
    case LossKind::kDrrl: return drrl_loss(in, spec.gamma_star, spec.c, spec.eps, beta_u);
  }
  throw Error("unknown loss kind");
}

/// Scores of one batch: one positive score per pair and `n_neg` negative
/// scores per pair, laid out like BatchSample::negatives.
struct BatchScores {
  Vec pos;
  Vec neg;
  std::size_t n_neg = 0;

  std::span<const double> neg_of(std::size_t p) const {
    return {neg.data() + p * n_neg, n_neg};
  }
};

struct BatchLossResult {
  double value = 0.0;
  Vec d_pos;
  Vec d_neg;
};

/// Mean over batch pairs of the per-pair loss (the pair's positive against
/// its own negatives), with gradients routed back to every score.
inline BatchLossResult batch_loss(const BatchSample& batch, const BatchScores& scores,
                                  const LossSpec& spec, const MarginState& margins) {
  const std::size_t n = batch.pairs.size();
  if (scores.pos.size() != n || scores.neg.size() != n * scores.n_neg) {
    throw Error("batch scores do not match the batch layout");
  }
  BatchLossResult r{0.0, Vec(n, 0.0), Vec(scores.neg.size(), 0.0)};
  if (n == 0) return r;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double beta_u =
        spec.kind == LossKind::kDrrl ? margins(batch.pairs[p].first) : spec.beta;
    UserLossInput in{{&scores.pos[p], 1}, scores.neg_of(p)};
    auto out = evaluate_loss(spec, in, beta_u);
    r.value += out.value * inv;
    r.d_pos[p] = out.d_pos[0] * inv;
    for (std::size_t k = 0; k < scores.n_neg; ++k) {
      r.d_neg[p * scores.n_neg + k] = out.d_neg[k] * inv;
    }
  }
  return r;
}

/// Gradient of sum over batch pairs of the margin objective, per margin slot.
inline std::map<Index, double> margin_gradients(const BatchSample& batch,
                                                const BatchScores& scores,
                                                const LossSpec& spec,
                                                const MarginState& margins) {
  std::map<Index, double> grads;
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const Index u = batch.pairs[p].first;
    const Index slot = margins.shared ? 0 : u;
    grads[slot] +=
        drrl_beta_gradient(scores.neg_of(p), spec.gamma_star, spec.c, spec.eps, margins(u));
  }
  return grads;
}

}  // namespace drrl
