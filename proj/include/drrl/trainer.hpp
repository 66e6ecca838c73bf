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

// Mini-batch training: Adam on embeddings, gradient descent on DrRL margins,
// early stopping on validation NDCG@20.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"
#include "drrl/graph_model.hpp"
#include "drrl/losses.hpp"
#include "drrl/metrics.hpp"

namespace drrl {

/// Raised when a loss or gradient stops being finite.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t n_neg = 1024;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int max_epochs = 300;
  int patience = 25;
  int eval_every = 1;
  std::uint64_t seed = 0;
  Index dim = 64;
  double init_std = 0.1;
  std::size_t steps_per_epoch = 0;  // 0: one pass over the train pairs
  NoiseConfig noise;

  void validate() const {
    if (batch_size == 0) throw Error("batch_size must be > 0");
    if (n_neg == 0) throw Error("n_neg must be > 0");
    if (!(lr > 0.0)) throw Error("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw Error("weight_decay must be >= 0");
    if (max_epochs < 1) throw Error("max_epochs must be >= 1");
    if (patience < 1) throw Error("patience must be >= 1");
    if (eval_every < 1) throw Error("eval_every must be >= 1");
    if (dim < 1) throw Error("dim must be >= 1");
    if (!(init_std > 0.0)) throw Error("init_std must be > 0");
    if (!(noise.ratio >= 0.0 && noise.ratio <= 1.0)) throw Error("noise ratio must lie in [0, 1]");
  }
};

struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw Error("adam_step: shape mismatch");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NonFiniteError("non-finite gradient at parameter " + std::to_string(k) +
                           " (step " + std::to_string(state.step + 1) + ")");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grads[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grads[k] * grads[k];
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

/// Adds 2 * wd * e to the gradient of every listed node (raw embeddings).
inline void apply_weight_decay(const EmbeddingTable& table, std::span<const Index> nodes,
                               double wd, EmbeddingTable& grads) {
  if (wd < 0.0) throw Error("weight decay must be >= 0");
  if (wd == 0.0) return;
  for (Index k : nodes) {
    auto e = table.node(k);
    auto g = grads.node(k);
    for (std::size_t t = 0; t < e.size(); ++t) g[t] += 2.0 * wd * e[t];
  }
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_ndcg20;
  std::optional<double> val_recall20;
  double mean_margin = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::string stop_reason;
  std::string diagnostics;
};

/// Patience rule on a maximised validation metric.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Records one evaluation; true when it is the best so far.
  bool improved(double metric) {
    if (metric > best_) {
      best_ = metric;
      since_best_ = 0;
      return true;
    }
    ++since_best_;
    return false;
  }
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  int since_best_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct TrainResult {
  EmbeddingTable table;  // raw embeddings at the best validation epoch
  MarginState margins;
  TrainReport report;
};

struct StepResult {
  double loss = 0.0;
  std::size_t pairs = 0;
};

namespace detail {

inline std::vector<Index> unique_sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline void add_infonce(const ForwardOutput& fwd, const BackboneConfig& cfg,
                        const std::vector<Index>& nodes, EmbeddingTable& g_final,
                        std::vector<double>& g_contrast, double& loss) {
  const auto d = static_cast<std::size_t>(fwd.final.dim);
  const auto& layer = fwd.layers[static_cast<std::size_t>(cfg.contrast_layer)];
  std::vector<std::span<const double>> first, second;
  for (Index k : nodes) {
    first.push_back(fwd.final.node(k));
    second.emplace_back(layer.data() + static_cast<std::size_t>(k) * d, d);
  }
  auto r = infonce_auxiliary(first, second, cfg.infonce_temperature, cfg.infonce_weight);
  loss += r.loss;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    auto gf = g_final.node(nodes[n]);
    for (std::size_t t = 0; t < d; ++t) {
      gf[t] += r.grad_first[n][t];
      g_contrast[static_cast<std::size_t>(nodes[n]) * d + t] += r.grad_second[n][t];
    }
  }
}

}  // namespace detail

/// Scores of a batch under the given representations.
inline BatchScores score_batch(const BatchSample& batch, const EmbeddingTable& repr) {
  BatchScores s;
  s.n_neg = batch.n_neg;
  s.pos.resize(batch.pairs.size());
  s.neg.resize(batch.negatives.size());
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [u, i] = batch.pairs[p];
    s.pos[p] = score(repr.user(u), repr.item(i));
    auto negs = batch.negatives_of(p);
    for (std::size_t k = 0; k < negs.size(); ++k) {
      s.neg[p * batch.n_neg + k] = score(repr.user(u), repr.item(negs[k]));
    }
  }
  return s;
}

struct BatchGradients {
  double loss = 0.0;
  EmbeddingTable grads;        // with respect to the raw embedding table
  std::vector<Index> touched;  // nodes appearing in the batch, sorted
};

/// Loss of a batch under a finished forward pass (plus the XSimGCL InfoNCE
/// term) and its gradient with respect to the raw embeddings.
inline BatchGradients batch_gradients(const ForwardOutput& fwd, const BatchScores& scores,
                                      const BatchSample& batch, const InteractionGraph& graph,
                                      const BackboneConfig& backbone, const LossSpec& spec,
                                      const MarginState& margins) {
  BatchGradients r;
  const auto loss = batch_loss(batch, scores, spec, margins);
  r.loss = loss.value;
  OutputGradients og{fwd.final.zeros_like(), {}};
  auto& g = og.final;
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [u, i] = batch.pairs[p];
    accumulate_score_gradient(fwd.final.user(u), fwd.final.item(i), loss.d_pos[p], g.user(u),
                              g.item(i));
    auto negs = batch.negatives_of(p);
    for (std::size_t k = 0; k < negs.size(); ++k) {
      accumulate_score_gradient(fwd.final.user(u), fwd.final.item(negs[k]),
                                loss.d_neg[p * batch.n_neg + k], g.user(u), g.item(negs[k]));
    }
  }

  const Index U = fwd.final.num_users;
  std::vector<Index> users, items;
  for (const auto& [u, i] : batch.pairs) {
    users.push_back(u);
    items.push_back(U + i);
  }
  users = detail::unique_sorted(std::move(users));
  std::vector<Index> pos_items = detail::unique_sorted(items);
  for (Index j : batch.negatives) items.push_back(U + j);
  items = detail::unique_sorted(std::move(items));

  if (backbone.kind == BackboneKind::kXSimGcl && backbone.infonce_weight > 0.0) {
    og.contrast_layer.assign(fwd.final.values.size(), 0.0);
    detail::add_infonce(fwd, backbone, users, g, og.contrast_layer, r.loss);
    detail::add_infonce(fwd, backbone, pos_items, g, og.contrast_layer, r.loss);
  }
  r.grads = backward(og, graph, backbone);
  r.touched = users;
  r.touched.insert(r.touched.end(), items.begin(), items.end());
  return r;
}

/// One optimisation step: margins first (DrRL, unless frozen), then the
/// embedding step on the loss evaluated with the updated margins.
template <typename Rng>
StepResult train_step(EmbeddingTable& table, MarginState& margins, AdamState& adam,
                      const BatchSample& batch, const InteractionGraph& graph,
                      const BackboneConfig& backbone, const LossSpec& spec,
                      const TrainConfig& cfg, Rng& noise_rng) {
  StepResult r;
  r.pairs = batch.pairs.size();
  if (batch.pairs.empty()) return r;
  const auto fwd = forward(table, graph, backbone, noise_rng);
  const auto scores = score_batch(batch, fwd.final);

  if (spec.kind == LossKind::kDrrl && spec.margin_mode != MarginMode::kFixed) {
    beta_step(margins, margin_gradients(batch, scores, spec, margins), spec.lr_beta);
  }

  auto bg = batch_gradients(fwd, scores, batch, graph, backbone, spec, margins);
  r.loss = bg.loss;
  if (spec.kind == LossKind::kDrrl) {
    // Report the robust objective -mean f+ + beta_u + M(beta_u); the beta_u
    // term carries no embedding gradient but keeps epochs comparable while
    // the margins move.
    double beta_sum = 0.0;
    for (const auto& pr : batch.pairs) beta_sum += margins(pr.first);
    r.loss += beta_sum / static_cast<double>(batch.pairs.size());
  }
  if (!std::isfinite(r.loss)) throw NonFiniteError("non-finite training loss");
  apply_weight_decay(table, bg.touched, cfg.weight_decay, bg.grads);
  adam_step(adam, table.values, bg.grads.values, cfg.lr);
  return r;
}

/// Representations used for ranking: the backbone output without XSimGCL noise.
inline EmbeddingTable inference_representation(const EmbeddingTable& table,
                                               const InteractionGraph& graph,
                                               BackboneConfig backbone) {
  backbone.noise_eps = 0.0;
  std::mt19937_64 unused(0);
  return forward(table, graph, backbone, unused).final;
}

/// Runs the training loop and returns the best-validation checkpoint.
/// `on_epoch`, when set, sees every finished epoch record.
inline TrainResult train(const DatasetSplit& split, const BackboneConfig& backbone,
                         const LossSpec& spec, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  backbone.validate();
  spec.validate();
  cfg.validate();
  const auto pairs = train_pairs(split);
  if (pairs.empty()) throw Error("train split is empty");
  const auto graph = InteractionGraph::from_split(split);

  std::mt19937_64 init_rng(derive_seed(cfg.seed, 0));
  std::mt19937_64 batch_rng(derive_seed(cfg.seed, 1));
  std::mt19937_64 noise_rng(derive_seed(cfg.seed, 2));

  TrainResult best;
  EmbeddingTable table(split.num_users, split.num_items, cfg.dim);
  init_normal(table, cfg.init_std, init_rng);
  MarginState margins(split.num_users, spec.beta0, spec.margin_mode == MarginMode::kShared);
  AdamState adam(table.values.size());
  best.table = table;
  best.margins = margins;

  const std::size_t steps =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                              : (pairs.size() + cfg.batch_size - 1) / cfg.batch_size;
  EarlyStopper stopper(cfg.patience);
  auto& rep = best.report;
  rep.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    try {
      for (std::size_t s = 0; s < steps; ++s) {
        auto batch = sample_batch(split, pairs, cfg.batch_size, cfg.n_neg, cfg.noise, batch_rng);
        auto st = train_step(table, margins, adam, batch, graph, backbone, spec, cfg, noise_rng);
        if (st.pairs == 0) continue;
        loss_sum += st.loss;
        ++batches;
      }
      for (double b : margins.values) {
        if (!std::isfinite(b)) throw NonFiniteError("non-finite margin");
      }
    } catch (const NonFiniteError& e) {
      rep.stop_reason = "non_finite";
      rep.diagnostics = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.mean_margin = mean(margins.values);

    bool stop = false;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs) {
      const auto repr = inference_representation(table, graph, backbone);
      const auto m = evaluate_split(repr, split, EvalTarget::kValidation, {20});
      rec.val_ndcg20 = m.get("ndcg", 20);
      rec.val_recall20 = m.get("recall", 20);
      if (stopper.improved(*rec.val_ndcg20)) {
        rep.best_metric = *rec.val_ndcg20;
        rep.best_epoch = epoch;
        best.table = table;
        best.margins = margins;
      } else if (stopper.should_stop()) {
        rep.stop_reason = "patience";
        stop = true;
      }
    }
    rep.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  return best;
}

}  // namespace drrl
