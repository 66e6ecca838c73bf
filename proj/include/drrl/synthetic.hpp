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

// Seeded block-structured interaction logs for smoke tests.

#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"

namespace drrl {

struct BlockDatasetConfig {
  Index users = 100;
  Index items = 60;
  Index blocks = 2;
  Index per_user = 16;
  double cross_block = 0.05;  // probability an interaction leaves the user's block
  std::uint64_t seed = 7;
};

/// User u prefers block u % blocks; items are split into contiguous blocks.
/// Every user gets `per_user` distinct items and distinct timestamps.
inline InteractionLog make_block_dataset(const BlockDatasetConfig& cfg) {
  if (cfg.users < 1 || cfg.items < 1 || cfg.blocks < 1 || cfg.blocks > cfg.items) {
    throw Error("block dataset: need users, items >= 1 and 1 <= blocks <= items");
  }
  if (!(cfg.cross_block >= 0.0 && cfg.cross_block <= 1.0)) {
    throw Error("block dataset: cross_block must lie in [0, 1]");
  }
  auto block_of = [&](Index i) {
    return static_cast<Index>(static_cast<std::int64_t>(i) * cfg.blocks / cfg.items);
  };
  std::vector<std::vector<Index>> block_items(static_cast<std::size_t>(cfg.blocks));
  for (Index i = 0; i < cfg.items; ++i) block_items[static_cast<std::size_t>(block_of(i))].push_back(i);
  if (cfg.blocks > 1 || cfg.cross_block == 0.0) {
    for (const auto& b : block_items) {
      if (static_cast<Index>(b.size()) < cfg.per_user) {
        throw Error("block dataset: a block has fewer items than per_user");
      }
    }
  }

  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  InteractionLog log;
  log.num_users = cfg.users;
  log.num_items = cfg.items;
  log.has_timestamps = true;
  log.user_ids.resize(static_cast<std::size_t>(cfg.users));
  log.item_ids.resize(static_cast<std::size_t>(cfg.items));
  std::iota(log.user_ids.begin(), log.user_ids.end(), 0);
  std::iota(log.item_ids.begin(), log.item_ids.end(), 0);

  for (Index u = 0; u < cfg.users; ++u) {
    const auto home = static_cast<std::size_t>(u % cfg.blocks);
    std::set<Index> chosen;
    while (static_cast<Index>(chosen.size()) < cfg.per_user) {
      const bool cross = cfg.blocks > 1 && coin(rng) < cfg.cross_block;
      std::size_t b = home;
      if (cross) {
        std::uniform_int_distribution<std::size_t> other(0, block_items.size() - 2);
        b = other(rng);
        if (b >= home) ++b;
      }
      const auto& pool = block_items[b];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      chosen.insert(pool[pick(rng)]);
    }
    std::vector<std::int64_t> stamps(chosen.size());
    std::iota(stamps.begin(), stamps.end(), 1);
    std::shuffle(stamps.begin(), stamps.end(), rng);
    std::size_t k = 0;
    for (Index i : chosen) {
      log.interactions.push_back({u, i, 1000 * static_cast<std::int64_t>(u) + stamps[k++]});
    }
  }
  return log;
}

/// Writes `user item timestamp` rows using the source ids of the log.
inline void write_interactions(std::ostream& out, const InteractionLog& log) {
  for (const auto& r : log.interactions) {
    out << log.user_ids[static_cast<std::size_t>(r.user)] << '\t'
        << log.item_ids[static_cast<std::size_t>(r.item)];
    if (log.has_timestamps) out << '\t' << r.timestamp;
    out << '\n';
  }
}

}  // namespace drrl
