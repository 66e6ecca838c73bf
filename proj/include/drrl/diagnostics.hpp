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

// Per-user worst-case weight and truncation diagnostics over a full sweep of
// each user's negatives (every item outside the train positives).

#pragma once

#include <optional>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"
#include "drrl/dro.hpp"
#include "drrl/graph_model.hpp"
#include "drrl/losses.hpp"
#include "drrl/metrics.hpp"

namespace drrl {

struct UserDiagnostics {
  Index user = 0;
  std::size_t n_neg = 0;
  std::size_t n_false_negatives = 0;
  WeightStats weights;
  std::optional<double> margin;       // beta used for weights and truncation
  std::optional<double> truncation;   // at `margin`
  std::optional<double> learned_margin;
  std::optional<double> learned_truncation;
};

struct DiagnosticsSummary {
  std::vector<UserDiagnostics> users;
  double mean_k1 = 0.0;
  std::optional<double> mean_k2;  // over users with at least one false negative
  std::optional<double> mean_truncation;
  std::optional<double> mean_learned_truncation;
};

/// Negatives of one user: every item outside the train positives, with the
/// false-negative flag set for held-out positives of noise splits.
struct UserNegatives {
  std::vector<Index> items;
  Vec scores;
  std::vector<std::uint8_t> mask;
};

inline UserNegatives user_negatives(const EmbeddingTable& repr, const DatasetSplit& split,
                                    Index u) {
  UserNegatives n;
  const auto& train = split.train[static_cast<std::size_t>(u)];
  const auto& val = split.validation[static_cast<std::size_t>(u)];
  const auto& test = split.test[static_cast<std::size_t>(u)];
  const bool noisy = split.kind == SplitKind::kNoise;
  for (Index i = 0; i < split.num_items; ++i) {
    if (std::binary_search(train.begin(), train.end(), i)) continue;
    n.items.push_back(i);
    n.scores.push_back(score(repr.user(u), repr.item(i)));
    const bool held_out = std::binary_search(val.begin(), val.end(), i) ||
                          std::binary_search(test.begin(), test.end(), i);
    n.mask.push_back(noisy && held_out ? 1 : 0);
  }
  return n;
}

/// Worst-case weights, margin and truncation for one user's negatives.
/// SL: exp(f / tau) weights, no truncation. CCL: alpha * 1[f > beta] at the
/// fixed beta. DrRL: the margin is re-solved as the minimiser of the margin
/// objective and the Cressie-Read weights (or the CCL-limit weights when
/// gamma_star == 1) are taken there.
inline UserDiagnostics diagnose_user(const UserNegatives& neg, const LossSpec& spec) {
  UserDiagnostics d;
  d.n_neg = neg.scores.size();
  for (auto m : neg.mask) d.n_false_negatives += m;
  Vec w(neg.scores.size(), 0.0);
  switch (spec.kind) {
    case LossKind::kSoftmax:
      w = sl_worst_case_weights(neg.scores, spec.tau);
      break;
    case LossKind::kCcl:
      d.margin = spec.beta;
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = neg.scores[j] > spec.beta ? spec.alpha : 0.0;
      break;
    case LossKind::kDrrl: {
      const auto m = solve_margin(neg.scores, spec.gamma_star, spec.c, spec.eps);
      d.margin = m.arg;
      if (spec.gamma_star > 1.0) {
        w = drrl_worst_case_weights(neg.scores, spec.gamma(), spec.c, m.arg).weights;
      } else {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = neg.scores[j] > m.arg ? spec.c : 0.0;
      }
      break;
    }
    default:
      throw Error("diagnostics need a weighted loss (sl, ccl or drrl), got " +
                  to_string(spec.kind));
  }
  d.weights = weight_stats(w, neg.mask);
  if (d.margin) d.truncation = truncation_ratio(neg.scores, *d.margin);
  return d;
}

/// Diagnostics for every user with at least one negative. `margins`, when
/// given, adds the truncation ratio at the learned per-user margins.
inline DiagnosticsSummary compute_diagnostics(const EmbeddingTable& repr,
                                              const DatasetSplit& split, const LossSpec& spec,
                                              const MarginState* margins = nullptr) {
  if (spec.kind == LossKind::kMse || spec.kind == LossKind::kBce ||
      spec.kind == LossKind::kBpr) {
    throw Error("diagnostics are undefined for " + to_string(spec.kind) +
                " (no worst-case weight notion)");
  }
  if (repr.num_users != split.num_users || repr.num_items != split.num_items) {
    throw Error("embedding and split id spaces disagree");
  }
  DiagnosticsSummary s;
  double k1 = 0.0, k2 = 0.0, tr = 0.0, ltr = 0.0;
  std::size_t n_k1 = 0, n_k2 = 0, n_tr = 0, n_ltr = 0;
  for (Index u = 0; u < split.num_users; ++u) {
    auto neg = user_negatives(repr, split, u);
    if (neg.scores.empty()) continue;
    auto d = diagnose_user(neg, spec);
    d.user = u;
    if (margins != nullptr && spec.kind == LossKind::kDrrl) {
      d.learned_margin = (*margins)(u);
      d.learned_truncation = truncation_ratio(neg.scores, *d.learned_margin);
      ltr += *d.learned_truncation;
      ++n_ltr;
    }
    if (!d.weights.degenerate) {
      k1 += d.weights.k1;
      ++n_k1;
    }
    if (d.weights.k2) {
      k2 += *d.weights.k2;
      ++n_k2;
    }
    if (d.truncation) {
      tr += *d.truncation;
      ++n_tr;
    }
    s.users.push_back(std::move(d));
  }
  if (n_k1) s.mean_k1 = k1 / static_cast<double>(n_k1);
  if (n_k2) s.mean_k2 = k2 / static_cast<double>(n_k2);
  if (n_tr) s.mean_truncation = tr / static_cast<double>(n_tr);
  if (n_ltr) s.mean_learned_truncation = ltr / static_cast<double>(n_ltr);
  return s;
}

}  // namespace drrl
