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

// Full-ranking top-K metrics and weight/truncation diagnostics.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"
#include "drrl/graph_model.hpp"

namespace drrl {

/// One user's ranking problem: scores over every item, items to exclude
/// (train positives) and the ground truth. Both sets are sorted.
struct RankingInstance {
  std::span<const double> scores;
  std::span<const Index> excluded;
  std::span<const Index> truth;
};

/// The K best non-excluded items, by descending score then ascending id.
inline std::vector<Index> top_k(const RankingInstance& inst, std::size_t k) {
  std::vector<Index> candidates;
  candidates.reserve(inst.scores.size());
  for (Index i = 0; i < static_cast<Index>(inst.scores.size()); ++i) {
    if (!std::binary_search(inst.excluded.begin(), inst.excluded.end(), i)) {
      candidates.push_back(i);
    }
  }
  k = std::min(k, candidates.size());
  auto better = [&](Index a, Index b) {
    if (inst.scores[a] != inst.scores[b]) return inst.scores[a] > inst.scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), better);
  candidates.resize(k);
  return candidates;
}

/// |top-K ∩ truth| / |truth|; empty when the truth set is empty.
inline std::optional<double> recall_at_k(const RankingInstance& inst, std::size_t k) {
  if (inst.truth.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (Index i : top_k(inst, k)) {
    hits += std::binary_search(inst.truth.begin(), inst.truth.end(), i) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(inst.truth.size());
}

inline std::optional<double> ndcg_at_k(const RankingInstance& inst, std::size_t k) {
  if (inst.truth.empty()) return std::nullopt;
  const auto ranked = top_k(inst, k);
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (std::binary_search(inst.truth.begin(), inst.truth.end(), ranked[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, inst.truth.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

struct MetricValue {
  std::string metric;  // "recall" or "ndcg"
  std::size_t k = 0;
  double value = 0.0;
};

struct MetricReport {
  std::vector<MetricValue> values;
  std::size_t users_evaluated = 0;

  double get(const std::string& metric, std::size_t k) const {
    for (const auto& v : values) {
      if (v.metric == metric && v.k == k) return v.value;
    }
    throw Error("metric " + metric + "@" + std::to_string(k) + " was not computed");
  }
};

/// Ranks every item for every user with non-empty truth, excluding train
/// positives (and, for test evaluation, validation positives too).
inline MetricReport evaluate_ranking(const EmbeddingTable& final_repr,
                                     const std::vector<std::vector<Index>>& excluded,
                                     const std::vector<std::vector<Index>>& truth,
                                     const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw Error("evaluate_ranking: no cutoffs given");
  const auto U = static_cast<std::size_t>(final_repr.num_users);
  const auto I = static_cast<std::size_t>(final_repr.num_items);
  if (excluded.size() != U || truth.size() != U) {
    throw Error("evaluate_ranking: user count mismatch");
  }
  // Unit-normalise items once; cosine then reduces to a dot product.
  const auto d = static_cast<std::size_t>(final_repr.dim);
  std::vector<double> items(I * d);
  for (std::size_t i = 0; i < I; ++i) {
    auto v = final_repr.item(static_cast<Index>(i));
    const double nv = norm2(v);
    if (nv == 0.0) throw Error("zero item embedding: cosine undefined");
    for (std::size_t k = 0; k < d; ++k) items[i * d + k] = v[k] / nv;
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  std::vector<double> recall_sum(ks.size(), 0.0), ndcg_sum(ks.size(), 0.0);
  MetricReport rep;
  Vec scores(I);
  for (std::size_t u = 0; u < U; ++u) {
    if (truth[u].empty()) continue;
    auto e = final_repr.user(static_cast<Index>(u));
    const double nu = norm2(e);
    if (nu == 0.0) throw Error("zero user embedding: cosine undefined");
    for (std::size_t i = 0; i < I; ++i) {
      scores[i] = dot(e, std::span<const double>(items.data() + i * d, d)) / nu;
    }
    RankingInstance inst{scores, excluded[u], truth[u]};
    const auto ranked = top_k(inst, kmax);
    for (std::size_t c = 0; c < ks.size(); ++c) {
      const std::size_t k = ks[c];
      double hits = 0.0, dcg = 0.0;
      for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        if (std::binary_search(truth[u].begin(), truth[u].end(), ranked[r])) {
          hits += 1.0;
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
      }
      double idcg = 0.0;
      for (std::size_t r = 0; r < std::min(k, truth[u].size()); ++r) {
        idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
      recall_sum[c] += hits / static_cast<double>(truth[u].size());
      ndcg_sum[c] += dcg / idcg;
    }
    ++rep.users_evaluated;
  }
  const double n = std::max<double>(1.0, static_cast<double>(rep.users_evaluated));
  for (std::size_t c = 0; c < ks.size(); ++c) {
    rep.values.push_back({"recall", ks[c], recall_sum[c] / n});
    rep.values.push_back({"ndcg", ks[c], ndcg_sum[c] / n});
  }
  return rep;
}

enum class EvalTarget { kValidation, kTest };

/// Metrics on the validation or test positives of a split.
inline MetricReport evaluate_split(const EmbeddingTable& final_repr, const DatasetSplit& split,
                                   EvalTarget target, const std::vector<std::size_t>& ks) {
  if (final_repr.num_users != split.num_users) {
    throw Error("user count mismatch: embeddings have " + std::to_string(final_repr.num_users) +
                ", split has " + std::to_string(split.num_users));
  }
  if (final_repr.num_items != split.num_items) {
    throw Error("item count mismatch: embeddings have " + std::to_string(final_repr.num_items) +
                ", split has " + std::to_string(split.num_items));
  }
  if (target == EvalTarget::kValidation) {
    return evaluate_ranking(final_repr, split.train, split.validation, ks);
  }
  std::vector<std::vector<Index>> excluded(split.train.size());
  for (std::size_t u = 0; u < excluded.size(); ++u) {
    excluded[u] = split.train[u];
    excluded[u].insert(excluded[u].end(), split.validation[u].begin(), split.validation[u].end());
    std::sort(excluded[u].begin(), excluded[u].end());
  }
  return evaluate_ranking(final_repr, excluded, split.test, ks);
}

struct WeightStats {
  double k1 = 0.0;
  std::optional<double> k2;
  bool degenerate = false;  // all weights zero
};

/// k1 = max(w) / mean(w); k2 = mean(w | mask) / mean(w), absent for an
/// empty mask.
inline WeightStats weight_stats(std::span<const double> weights,
                                std::span<const std::uint8_t> false_negative_mask) {
  if (weights.empty()) throw Error("weight_stats: empty weight vector");
  if (!false_negative_mask.empty() && false_negative_mask.size() != weights.size()) {
    throw Error("weight_stats: mask length differs from weight length");
  }
  for (double w : weights) {
    if (w < 0.0) throw Error("weight_stats: negative weight");
  }
  WeightStats s;
  const double m = mean(weights);
  if (m == 0.0) {
    s.degenerate = true;
    return s;
  }
  s.k1 = *std::max_element(weights.begin(), weights.end()) / m;
  double masked = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < false_negative_mask.size(); ++j) {
    if (false_negative_mask[j]) {
      masked += weights[j];
      ++count;
    }
  }
  if (count > 0) s.k2 = masked / static_cast<double>(count) / m;
  return s;
}

/// Fraction of scores with f <= beta.
inline double truncation_ratio(std::span<const double> neg_scores, double beta) {
  if (neg_scores.empty()) throw Error("truncation_ratio: no scores");
  const auto truncated = std::count_if(neg_scores.begin(), neg_scores.end(),
                                       [&](double f) { return f <= beta; });
  return static_cast<double>(truncated) / static_cast<double>(neg_scores.size());
}

}  // namespace drrl
