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

// Interaction logs, dataset splits and negative sampling.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drrl/common.hpp"
#include "json.hpp"

namespace drrl {

struct Interaction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;
};

/// Implicit-feedback log with dense 0-based ids. `user_ids` / `item_ids` map
/// dense ids back to the ids found in the source file.
struct InteractionLog {
  std::vector<Interaction> interactions;
  Index num_users = 0;
  Index num_items = 0;
  bool has_timestamps = false;
  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;
};

enum class SplitKind { kIid, kTemporalOod, kNoise };

inline std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::kIid: return "iid";
    case SplitKind::kTemporalOod: return "temporal";
    case SplitKind::kNoise: return "noise";
  }
  return "iid";
}

inline SplitKind split_kind_from_string(const std::string& s) {
  if (s == "iid") return SplitKind::kIid;
  if (s == "temporal" || s == "ood") return SplitKind::kTemporalOod;
  if (s == "noise") return SplitKind::kNoise;
  throw Error("unknown split kind '" + s + "' (expected iid|temporal|noise)");
}

using ItemSets = std::vector<std::vector<Index>>;  // per user, sorted ascending

/// Per-user train / validation / test positives. Sets are pairwise disjoint.
struct DatasetSplit {
  SplitKind kind = SplitKind::kIid;
  Index num_users = 0;
  Index num_items = 0;
  std::uint64_t seed = 0;
  ItemSets train;
  ItemSets validation;
  ItemSets test;

  std::size_t count(const ItemSets& sets) const {
    std::size_t n = 0;
    for (const auto& s : sets) n += s.size();
    return n;
  }
  std::size_t num_train() const { return count(train); }
  bool is_train_positive(Index user, Index item) const {
    const auto& s = train[static_cast<std::size_t>(user)];
    return std::binary_search(s.begin(), s.end(), item);
  }
};

/// Where noisy negatives are drawn from.
enum class NoisePool { kHeldOut, kTrainPositives };

struct NoiseConfig {
  double ratio = 0.0;
  NoisePool pool = NoisePool::kHeldOut;
};

/// One mini-batch: (user, positive) pairs, `n_neg` negatives per pair stored
/// contiguously, and the false-negative flag of every negative.
struct BatchSample {
  std::vector<std::pair<Index, Index>> pairs;
  std::size_t n_neg = 0;
  std::vector<Index> negatives;
  std::vector<std::uint8_t> false_negative_mask;
  std::size_t skipped_pairs = 0;

  std::span<const Index> negatives_of(std::size_t p) const {
    return {negatives.data() + p * n_neg, n_neg};
  }
  std::span<const std::uint8_t> mask_of(std::size_t p) const {
    return {false_negative_mask.data() + p * n_neg, n_neg};
  }
};

namespace detail {

template <typename T>
bool parse_integer(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' ||
                                 line[pos] == '\r')) {
      ++pos;
    }
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' &&
           line[end] != '\r') {
      ++end;
    }
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

inline std::vector<Index> sorted_copy(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Parses `user item [timestamp]` rows. Ids are remapped to dense indices in
/// ascending order of the source ids; duplicate pairs keep the earliest
/// timestamp.
inline InteractionLog parse_interactions(std::istream& in) {
  struct Row {
    std::int64_t user, item, ts;
    bool has_ts;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(line_no, "expected 'user item [timestamp]', got " +
                                    std::to_string(fields.size()) + " fields");
    }
    Row r{0, 0, 0, fields.size() == 3};
    if (!detail::parse_integer(fields[0], r.user) ||
        !detail::parse_integer(fields[1], r.item) ||
        (r.has_ts && !detail::parse_integer(fields[2], r.ts))) {
      throw ParseError(line_no, "non-integer field in '" + line + "'");
    }
    if (r.user < 0 || r.item < 0) throw ParseError(line_no, "negative id");
    rows.push_back(r);
  }
  if (rows.empty()) throw Error("empty interaction log");

  InteractionLog log;
  log.has_timestamps = std::all_of(rows.begin(), rows.end(),
                                   [](const Row& r) { return r.has_ts; });
  std::map<std::int64_t, Index> user_map, item_map;
  for (const auto& r : rows) {
    user_map.emplace(r.user, 0);
    item_map.emplace(r.item, 0);
  }
  for (auto& [raw, dense] : user_map) {
    dense = static_cast<Index>(log.user_ids.size());
    log.user_ids.push_back(raw);
  }
  for (auto& [raw, dense] : item_map) {
    dense = static_cast<Index>(log.item_ids.size());
    log.item_ids.push_back(raw);
  }
  log.num_users = static_cast<Index>(log.user_ids.size());
  log.num_items = static_cast<Index>(log.item_ids.size());

  std::map<std::pair<Index, Index>, std::int64_t> earliest;
  for (const auto& r : rows) {
    auto key = std::make_pair(user_map[r.user], item_map[r.item]);
    auto ts = log.has_timestamps ? r.ts : 0;
    auto [it, inserted] = earliest.emplace(key, ts);
    if (!inserted) it->second = std::min(it->second, ts);
  }
  log.interactions.reserve(earliest.size());
  for (const auto& [key, ts] : earliest) {
    log.interactions.push_back({key.first, key.second, ts});
  }
  return log;
}

inline InteractionLog load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction file " + path.string());
  return parse_interactions(in);
}

/// Drops users and items with fewer than `k` interactions until no more
/// change, then re-densifies ids (source ids are preserved in the maps).
inline InteractionLog k_core_filter(const InteractionLog& log, int k) {
  std::vector<Interaction> kept = log.interactions;
  while (true) {
    std::vector<int> user_deg(static_cast<std::size_t>(log.num_users), 0);
    std::vector<int> item_deg(static_cast<std::size_t>(log.num_items), 0);
    for (const auto& x : kept) {
      ++user_deg[static_cast<std::size_t>(x.user)];
      ++item_deg[static_cast<std::size_t>(x.item)];
    }
    std::vector<Interaction> next;
    for (const auto& x : kept) {
      if (user_deg[static_cast<std::size_t>(x.user)] >= k &&
          item_deg[static_cast<std::size_t>(x.item)] >= k) {
        next.push_back(x);
      }
    }
    if (next.size() == kept.size()) break;
    kept = std::move(next);
  }
  if (kept.empty()) throw Error("k-core filter removed every interaction");

  InteractionLog out;
  out.has_timestamps = log.has_timestamps;
  std::vector<Index> user_new(static_cast<std::size_t>(log.num_users), -1);
  std::vector<Index> item_new(static_cast<std::size_t>(log.num_items), -1);
  for (const auto& x : kept) {
    user_new[static_cast<std::size_t>(x.user)] = 0;
    item_new[static_cast<std::size_t>(x.item)] = 0;
  }
  for (std::size_t u = 0; u < user_new.size(); ++u) {
    if (user_new[u] < 0) continue;
    user_new[u] = static_cast<Index>(out.user_ids.size());
    out.user_ids.push_back(log.user_ids.empty() ? static_cast<std::int64_t>(u)
                                                : log.user_ids[u]);
  }
  for (std::size_t i = 0; i < item_new.size(); ++i) {
    if (item_new[i] < 0) continue;
    item_new[i] = static_cast<Index>(out.item_ids.size());
    out.item_ids.push_back(log.item_ids.empty() ? static_cast<std::int64_t>(i)
                                                : log.item_ids[i]);
  }
  out.num_users = static_cast<Index>(out.user_ids.size());
  out.num_items = static_cast<Index>(out.item_ids.size());
  for (const auto& x : kept) {
    out.interactions.push_back({user_new[static_cast<std::size_t>(x.user)],
                                item_new[static_cast<std::size_t>(x.item)],
                                x.timestamp});
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<Interaction>> group_by_user(
    const InteractionLog& log) {
  std::vector<std::vector<Interaction>> by_user(
      static_cast<std::size_t>(log.num_users));
  for (const auto& x : log.interactions) {
    by_user[static_cast<std::size_t>(x.user)].push_back(x);
  }
  return by_user;
}

inline DatasetSplit empty_split(const InteractionLog& log, SplitKind kind) {
  DatasetSplit s;
  s.kind = kind;
  s.num_users = log.num_users;
  s.num_items = log.num_items;
  const auto n = static_cast<std::size_t>(log.num_users);
  s.train.resize(n);
  s.validation.resize(n);
  s.test.resize(n);
  return s;
}

}  // namespace detail

/// Per-user random partition. `train_frac` of each user's items (rounded to
/// the nearest integer, at least one) go to train+validation, and
/// `val_frac_of_train` of those (rounded, keeping one train item) go to
/// validation. `kind` may be kIid or kNoise; both use the same partition.
inline DatasetSplit split_iid(const InteractionLog& log, double train_frac,
                              double val_frac_of_train, std::uint64_t seed,
                              SplitKind kind = SplitKind::kIid) {
  if (!(train_frac > 0.0 && train_frac < 1.0) ||
      !(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0)) {
    throw Error("split fractions must lie in (0, 1)");
  }
  if (kind == SplitKind::kTemporalOod) {
    throw Error("split_iid cannot produce a temporal split");
  }
  auto split = detail::empty_split(log, kind);
  split.seed = seed;
  std::mt19937_64 rng(derive_seed(seed, 0));
  auto by_user = detail::group_by_user(log);
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& rows = by_user[u];
    std::vector<Index> items;
    items.reserve(rows.size());
    for (const auto& x : rows) items.push_back(x.item);
    std::sort(items.begin(), items.end());
    std::shuffle(items.begin(), items.end(), rng);
    const auto n = static_cast<long>(items.size());
    long n_trainval = std::max(1L, std::lround(static_cast<double>(n) * train_frac));
    long n_val = std::lround(static_cast<double>(n_trainval) * val_frac_of_train);
    n_val = std::min(n_val, n_trainval - 1);
    const long n_train = n_trainval - n_val;
    split.train[u] = detail::sorted_copy({items.begin(), items.begin() + n_train});
    split.validation[u] = detail::sorted_copy(
        {items.begin() + n_train, items.begin() + n_trainval});
    split.test[u] = detail::sorted_copy({items.begin() + n_trainval, items.end()});
  }
  return split;
}

/// Per-user chronological split: the latest ceil(test_frac * n) interactions
/// form the test set (always leaving one for training), the latest
/// round(val_frac * n_train) of the rest form validation. Timestamp ties are
/// ordered by ascending item id. Test items absent from every train set are
/// dropped.
inline DatasetSplit split_temporal(const InteractionLog& log, double test_frac,
                                   double val_frac_of_train = 0.1) {
  if (!log.has_timestamps) {
    throw Error("temporal split needs a timestamp on every row; use an iid split");
  }
  if (!(test_frac >= 0.0 && test_frac < 1.0) ||
      !(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0)) {
    throw Error("split fractions must lie in [0, 1)");
  }
  auto split = detail::empty_split(log, SplitKind::kTemporalOod);
  auto by_user = detail::group_by_user(log);
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& rows = by_user[u];
    std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.item < b.item;
    });
    const auto n = static_cast<long>(rows.size());
    // The small offset keeps e.g. 0.2 * 5 from rounding up to 2.
    long n_test = static_cast<long>(std::ceil(test_frac * static_cast<double>(n) - 1e-9));
    n_test = std::clamp(n_test, 0L, n - 1);
    const long n_trainval = n - n_test;
    long n_val = std::lround(static_cast<double>(n_trainval) * val_frac_of_train);
    n_val = std::min(n_val, n_trainval - 1);
    const long n_train = n_trainval - n_val;
    for (long k = 0; k < n; ++k) {
      auto item = rows[static_cast<std::size_t>(k)].item;
      if (k < n_train) {
        split.train[u].push_back(item);
      } else if (k < n_trainval) {
        split.validation[u].push_back(item);
      } else {
        split.test[u].push_back(item);
      }
    }
  }
  std::vector<std::uint8_t> in_train(static_cast<std::size_t>(log.num_items), 0);
  for (const auto& items : split.train) {
    for (auto i : items) in_train[static_cast<std::size_t>(i)] = 1;
  }
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& test = split.test[u];
    std::erase_if(test, [&](Index i) { return !in_train[static_cast<std::size_t>(i)]; });
    std::sort(split.train[u].begin(), split.train[u].end());
    std::sort(split.validation[u].begin(), split.validation[u].end());
    std::sort(test.begin(), test.end());
  }
  return split;
}

/// Draws `batch_size` (user, positive) pairs uniformly from the train pairs
/// and `n_neg` negatives per pair. Under a kNoise split each negative slot is,
/// with probability `noise.ratio`, a false negative drawn from the user's
/// noise pool (flagged in the mask); otherwise it is uniform over the items
/// outside the user's train positives. Users with no possible negative are
/// skipped and counted in `skipped_pairs`.
template <typename Rng>
BatchSample sample_batch(const DatasetSplit& split,
                         const std::vector<std::pair<Index, Index>>& train_pairs,
                         std::size_t batch_size, std::size_t n_neg,
                         const NoiseConfig& noise, Rng& rng) {
  if (train_pairs.empty()) throw Error("cannot sample from an empty train split");
  const double p = split.kind == SplitKind::kNoise ? noise.ratio : 0.0;
  BatchSample batch;
  batch.n_neg = n_neg;
  batch.pairs.reserve(batch_size);
  batch.negatives.reserve(batch_size * n_neg);
  batch.false_negative_mask.reserve(batch_size * n_neg);

  std::uniform_int_distribution<std::size_t> pick_pair(0, train_pairs.size() - 1);
  std::uniform_int_distribution<Index> pick_item(0, split.num_items - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Index> pool;

  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto pair = train_pairs[pick_pair(rng)];
    const auto u = static_cast<std::size_t>(pair.first);
    const auto& train = split.train[u];
    const bool has_clean = static_cast<std::size_t>(split.num_items) > train.size();

    pool.clear();
    if (p > 0.0) {
      if (noise.pool == NoisePool::kHeldOut) {
        pool = split.validation[u];
        pool.insert(pool.end(), split.test[u].begin(), split.test[u].end());
      } else {
        pool = train;
      }
    }
    if (!has_clean && pool.empty()) {
      ++batch.skipped_pairs;
      continue;
    }
    batch.pairs.push_back(pair);
    for (std::size_t k = 0; k < n_neg; ++k) {
      const bool noisy = !pool.empty() && (p >= 1.0 || (p > 0.0 && coin(rng) < p));
      if (noisy || !has_clean) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        batch.negatives.push_back(pool[pick(rng)]);
        batch.false_negative_mask.push_back(1);
        continue;
      }
      Index j;
      do {
        j = pick_item(rng);
      } while (std::binary_search(train.begin(), train.end(), j));
      batch.negatives.push_back(j);
      batch.false_negative_mask.push_back(0);
    }
  }
  return batch;
}

inline std::vector<std::pair<Index, Index>> train_pairs(const DatasetSplit& split) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(split.num_train());
  for (std::size_t u = 0; u < split.train.size(); ++u) {
    for (auto i : split.train[u]) pairs.emplace_back(static_cast<Index>(u), i);
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Split files: train.tsv / validation.tsv / test.tsv with dense ids, a JSON
// manifest, and users.map / items.map sidecars (dense id -> source id).

inline void write_split(const std::filesystem::path& dir, const DatasetSplit& split,
                        const InteractionLog* log = nullptr) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const ItemSets& sets, const char* name) {
    std::ostringstream out;
    for (std::size_t u = 0; u < sets.size(); ++u) {
      for (auto i : sets[u]) out << u << '\t' << i << '\n';
    }
    write_file_atomic(dir / name, out.str());
  };
  dump(split.train, "train.tsv");
  dump(split.validation, "validation.tsv");
  dump(split.test, "test.tsv");

  nlohmann::ordered_json manifest;
  manifest["num_users"] = split.num_users;
  manifest["num_items"] = split.num_items;
  manifest["counts"] = {{"train", split.num_train()},
                        {"validation", split.count(split.validation)},
                        {"test", split.count(split.test)}};
  manifest["split_kind"] = to_string(split.kind);
  manifest["seed"] = split.seed;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

  if (log != nullptr) {
    auto dump_map = [&](const std::vector<std::int64_t>& ids, const char* name) {
      std::ostringstream out;
      for (std::size_t k = 0; k < ids.size(); ++k) out << k << '\t' << ids[k] << '\n';
      write_file_atomic(dir / name, out.str());
    };
    dump_map(log->user_ids, "users.map");
    dump_map(log->item_ids, "items.map");
  }
}

inline DatasetSplit read_split(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error("missing split manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid manifest.json: " + std::string(e.what()));
  }
  DatasetSplit split;
  split.num_users = manifest.at("num_users").get<Index>();
  split.num_items = manifest.at("num_items").get<Index>();
  split.kind = split_kind_from_string(manifest.at("split_kind").get<std::string>());
  split.seed = manifest.value("seed", std::uint64_t{0});
  const auto n = static_cast<std::size_t>(split.num_users);
  auto load = [&](ItemSets& sets, const char* name) {
    sets.assign(n, {});
    std::ifstream in(dir / name);
    if (!in) throw Error("missing split file " + (dir / name).string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto fields = detail::split_fields(line);
      if (fields.empty() || fields[0].front() == '#') continue;
      Index u = 0, i = 0;
      if (fields.size() < 2 || !detail::parse_integer(fields[0], u) ||
          !detail::parse_integer(fields[1], i)) {
        throw ParseError(line_no, std::string("malformed row in ") + name);
      }
      if (u < 0 || u >= split.num_users || i < 0 || i >= split.num_items) {
        throw ParseError(line_no, std::string("id out of range in ") + name);
      }
      sets[static_cast<std::size_t>(u)].push_back(i);
    }
    for (auto& s : sets) std::sort(s.begin(), s.end());
  };
  load(split.train, "train.tsv");
  load(split.validation, "validation.tsv");
  load(split.test, "test.tsv");
  return split;
}

}  // namespace drrl
