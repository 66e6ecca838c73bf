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

// Embedding tables, MF / LightGCN / XSimGCL propagation, cosine scoring and
// the analytic gradients of all of them.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"

namespace drrl {

/// User and item vectors in one row-major block: users first, then items.
/// Node k < num_users is user k; node num_users + i is item i.
struct EmbeddingTable {
  Index num_users = 0;
  Index num_items = 0;
  Index dim = 0;
  std::vector<double> values;

  EmbeddingTable() = default;
  EmbeddingTable(Index users, Index items, Index d)
      : num_users(users), num_items(items), dim(d),
        values(static_cast<std::size_t>(users + items) * static_cast<std::size_t>(d), 0.0) {
    if (d < 1) throw Error("embedding dimension must be >= 1");
  }

  Index num_nodes() const { return num_users + num_items; }
  std::span<double> node(Index k) {
    return {values.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> node(Index k) const {
    return {values.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> user(Index u) { return node(u); }
  std::span<const double> user(Index u) const { return node(u); }
  std::span<double> item(Index i) { return node(num_users + i); }
  std::span<const double> item(Index i) const { return node(num_users + i); }

  EmbeddingTable zeros_like() const { return EmbeddingTable(num_users, num_items, dim); }
};

template <typename Rng>
void init_normal(EmbeddingTable& table, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& x : table.values) x = normal(rng);
}

/// Bipartite train graph in CSR form over the joint node index, with the
/// symmetric normalisation 1/sqrt(deg_u * deg_i) stored per edge.
struct InteractionGraph {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<std::size_t> offsets;
  std::vector<Index> neighbors;
  std::vector<double> coefficients;
  std::vector<Index> degrees;

  Index num_nodes() const { return num_users + num_items; }

  static InteractionGraph from_split(const DatasetSplit& split) {
    InteractionGraph g;
    g.num_users = split.num_users;
    g.num_items = split.num_items;
    const auto n = static_cast<std::size_t>(g.num_nodes());
    std::vector<std::vector<Index>> adj(n);
    for (std::size_t u = 0; u < split.train.size(); ++u) {
      for (auto i : split.train[u]) {
        adj[u].push_back(g.num_users + i);
        adj[static_cast<std::size_t>(g.num_users + i)].push_back(static_cast<Index>(u));
      }
    }
    g.degrees.resize(n);
    g.offsets.assign(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
      std::sort(adj[k].begin(), adj[k].end());
      g.degrees[k] = static_cast<Index>(adj[k].size());
      g.offsets[k + 1] = g.offsets[k] + adj[k].size();
    }
    g.neighbors.reserve(g.offsets[n]);
    g.coefficients.reserve(g.offsets[n]);
    for (std::size_t k = 0; k < n; ++k) {
      for (auto m : adj[k]) {
        g.neighbors.push_back(m);
        g.coefficients.push_back(
            1.0 / std::sqrt(static_cast<double>(g.degrees[k]) *
                            static_cast<double>(g.degrees[static_cast<std::size_t>(m)])));
      }
    }
    return g;
  }

  /// out = A_hat * in, where A_hat is the normalised adjacency. A_hat is
  /// symmetric, so the same routine serves as its own transpose.
  void propagate(std::span<const double> in, std::span<double> out, Index dim) const {
    std::fill(out.begin(), out.end(), 0.0);
    const auto d = static_cast<std::size_t>(dim);
    for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
      double* dst = out.data() + k * d;
      for (std::size_t e = offsets[k]; e < offsets[k + 1]; ++e) {
        const double* src = in.data() + static_cast<std::size_t>(neighbors[e]) * d;
        const double c = coefficients[e];
        for (std::size_t t = 0; t < d; ++t) dst[t] += c * src[t];
      }
    }
  }
};

enum class BackboneKind { kMf, kLightGcn, kXSimGcl };

inline std::string to_string(BackboneKind k) {
  switch (k) {
    case BackboneKind::kMf: return "mf";
    case BackboneKind::kLightGcn: return "lightgcn";
    case BackboneKind::kXSimGcl: return "xsimgcl";
  }
  return "mf";
}

inline BackboneKind backbone_from_string(const std::string& s) {
  if (s == "mf") return BackboneKind::kMf;
  if (s == "lightgcn") return BackboneKind::kLightGcn;
  if (s == "xsimgcl") return BackboneKind::kXSimGcl;
  throw Error("unknown backbone '" + s + "' (expected mf|lightgcn|xsimgcl)");
}

struct BackboneConfig {
  BackboneKind kind = BackboneKind::kMf;
  int layers = 2;
  double noise_eps = 0.2;
  int contrast_layer = 1;
  double infonce_weight = 0.001;
  double infonce_temperature = 0.2;

  bool is_graph() const { return kind != BackboneKind::kMf; }

  void validate() const {
    if (is_graph() && layers < 1) throw Error("graph backbones need layers >= 1");
    if (noise_eps < 0.0) throw Error("noise_eps must be >= 0");
    if (kind == BackboneKind::kXSimGcl && (contrast_layer < 0 || contrast_layer > layers)) {
      throw Error("contrast_layer must lie in [0, layers]");
    }
    if (infonce_temperature <= 0.0) throw Error("infonce_temperature must be > 0");
  }
};

/// Result of a forward pass. `layers` holds layer 0..L (graph backbones
/// only); XSimGCL layers 1..L include their noise.
struct ForwardOutput {
  EmbeddingTable final;
  std::vector<std::vector<double>> layers;
};

/// Runs the backbone. MF is the identity; LightGCN averages layers 0..L of
/// normalised-neighbour propagation; XSimGCL adds a random vector of L2 norm
/// `noise_eps` to every node at each propagated layer.
template <typename Rng>
ForwardOutput forward(const EmbeddingTable& table, const InteractionGraph& graph,
                      const BackboneConfig& cfg, Rng& rng) {
  ForwardOutput out;
  out.final = table;
  if (!cfg.is_graph()) return out;
  if (graph.num_users != table.num_users || graph.num_items != table.num_items) {
    throw Error("graph and embedding table disagree on node counts");
  }
  const auto d = static_cast<std::size_t>(table.dim);
  out.layers.reserve(static_cast<std::size_t>(cfg.layers) + 1);
  out.layers.push_back(table.values);
  auto& acc = out.final.values;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 1; l <= cfg.layers; ++l) {
    std::vector<double> next(table.values.size());
    graph.propagate(out.layers.back(), next, table.dim);
    if (cfg.kind == BackboneKind::kXSimGcl && cfg.noise_eps > 0.0) {
      std::vector<double> noise(d);
      for (std::size_t k = 0; k < static_cast<std::size_t>(table.num_nodes()); ++k) {
        double nn = 0.0;
        do {
          for (auto& z : noise) z = normal(rng);
          nn = norm2(noise);
        } while (nn == 0.0);
        for (std::size_t t = 0; t < d; ++t) next[k * d + t] += cfg.noise_eps * noise[t] / nn;
      }
    }
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += next[k];
    out.layers.push_back(std::move(next));
  }
  const double inv = 1.0 / static_cast<double>(cfg.layers + 1);
  for (auto& x : acc) x *= inv;
  return out;
}

/// Gradients with respect to the forward outputs: the final representation
/// and, for XSimGCL, the contrast layer.
struct OutputGradients {
  EmbeddingTable final;
  std::vector<double> contrast_layer;  // empty when unused
};

/// Pulls output gradients back to the raw embedding table. Propagation is
/// linear (XSimGCL noise is a constant offset), so this applies the same
/// normalised adjacency to the gradients.
inline EmbeddingTable backward(const OutputGradients& grads, const InteractionGraph& graph,
                               const BackboneConfig& cfg) {
  if (!cfg.is_graph()) {
    if (!grads.contrast_layer.empty()) throw Error("MF has no contrast layer");
    return grads.final;
  }
  EmbeddingTable out = grads.final;
  const auto dim = grads.final.dim;
  std::vector<double> cur = grads.final.values;
  std::vector<double> next(cur.size());
  for (int l = 1; l <= cfg.layers; ++l) {
    graph.propagate(cur, next, dim);
    std::swap(cur, next);
    for (std::size_t k = 0; k < cur.size(); ++k) out.values[k] += cur[k];
  }
  const double inv = 1.0 / static_cast<double>(cfg.layers + 1);
  for (auto& x : out.values) x *= inv;

  if (!grads.contrast_layer.empty()) {
    cur = grads.contrast_layer;
    for (int l = 1; l <= cfg.contrast_layer; ++l) {
      graph.propagate(cur, next, dim);
      std::swap(cur, next);
    }
    for (std::size_t k = 0; k < cur.size(); ++k) out.values[k] += cur[k];
  }
  return out;
}

/// Cosine similarity. Zero vectors have no defined cosine.
inline double score(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine score of a zero vector");
  return dot(a, b) / (na * nb);
}

struct ScoreGradient {
  Vec d_first;
  Vec d_second;
};

/// d cos(a,b)/da = (b_hat - cos * a_hat) / |a|, and symmetrically for b.
inline ScoreGradient score_gradient(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine score of a zero vector");
  const double f = dot(a, b) / (na * nb);
  ScoreGradient g{Vec(a.size()), Vec(b.size())};
  for (std::size_t t = 0; t < a.size(); ++t) {
    g.d_first[t] = (b[t] / nb - f * a[t] / na) / na;
    g.d_second[t] = (a[t] / na - f * b[t] / nb) / nb;
  }
  return g;
}

/// Accumulates scale * d cos(a,b) into grad_a and grad_b.
inline void accumulate_score_gradient(std::span<const double> a, std::span<const double> b,
                                      double scale, std::span<double> grad_a,
                                      std::span<double> grad_b) {
  if (scale == 0.0) return;
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine score of a zero vector");
  const double f = dot(a, b) / (na * nb);
  for (std::size_t t = 0; t < a.size(); ++t) {
    grad_a[t] += scale * (b[t] / nb - f * a[t] / na) / na;
    grad_b[t] += scale * (a[t] / na - f * b[t] / nb) / nb;
  }
}

struct InfoNceResult {
  double loss = 0.0;
  std::vector<Vec> grad_first;
  std::vector<Vec> grad_second;
};

/// InfoNCE between two views of the same nodes: node k's positive is its own
/// second view, the other nodes' second views are its negatives. Cosine
/// similarity over `temperature`, averaged over nodes and scaled by `weight`.
inline InfoNceResult infonce_auxiliary(const std::vector<std::span<const double>>& first,
                                       const std::vector<std::span<const double>>& second,
                                       double temperature, double weight) {
  if (first.size() != second.size()) throw Error("InfoNCE views differ in size");
  const std::size_t n = first.size();
  InfoNceResult r;
  r.grad_first.assign(n, Vec(n ? first[0].size() : 0, 0.0));
  r.grad_second.assign(n, Vec(n ? first[0].size() : 0, 0.0));
  if (n < 2 || weight == 0.0) return r;
  std::vector<double> logits(n);
  for (std::size_t k = 0; k < n; ++k) {
    double mx = -1e300;
    for (std::size_t m = 0; m < n; ++m) {
      logits[m] = score(first[k], second[m]) / temperature;
      mx = std::max(mx, logits[m]);
    }
    double z = 0.0;
    for (auto l : logits) z += std::exp(l - mx);
    r.loss += -(logits[k] - mx) + std::log(z);
    for (std::size_t m = 0; m < n; ++m) {
      const double softmax = std::exp(logits[m] - mx) / z;
      const double dlogit = (softmax - (m == k ? 1.0 : 0.0)) * weight /
                            (static_cast<double>(n) * temperature);
      accumulate_score_gradient(first[k], second[m], dlogit, r.grad_first[k], r.grad_second[m]);
    }
  }
  r.loss *= weight / static_cast<double>(n);
  return r;
}

}  // namespace drrl
