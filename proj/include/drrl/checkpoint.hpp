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

// Binary checkpoint container.
//
//   "DRRL" u32 version u32 |U| u32 |I| u32 d
//   f32[(|U| + |I|) * d]           users then items, row-major
//   optional sections: tag[4] u64 payload_bytes payload
//     "MRGN": u32 shared u32 count f64[count]
//
// All integers and floats are little-endian. A JSON sidecar (<path>.json)
// records epoch, metric, config hash and the backbone settings.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "drrl/common.hpp"
#include "drrl/graph_model.hpp"
#include "drrl/losses.hpp"

namespace drrl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("checkpoint truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

struct Checkpoint {
  EmbeddingTable table;
  std::optional<MarginState> margins;
};

inline std::string encode_checkpoint(const EmbeddingTable& table, const MarginState* margins) {
  std::string out = "DRRL";
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.num_users));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.num_items));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim));
  for (double x : table.values) detail::put_le<float>(out, static_cast<float>(x));
  if (margins != nullptr) {
    out += "MRGN";
    const auto count = margins->values.size();
    detail::put_le<std::uint64_t>(out, 8 + 8 * count);
    detail::put_le<std::uint32_t>(out, margins->shared ? 1u : 0u);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(count));
    for (double b : margins->values) detail::put_le<double>(out, b);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 20 || bytes.compare(0, 4, "DRRL") != 0) {
    throw Error("not a checkpoint file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto users = detail::get_le<std::uint32_t>(bytes, pos);
  const auto items = detail::get_le<std::uint32_t>(bytes, pos);
  const auto dim = detail::get_le<std::uint32_t>(bytes, pos);
  Checkpoint ck;
  ck.table = EmbeddingTable(static_cast<Index>(users), static_cast<Index>(items),
                            static_cast<Index>(dim));
  for (auto& x : ck.table.values) x = detail::get_le<float>(bytes, pos);
  while (pos < bytes.size()) {
    if (pos + 12 > bytes.size()) throw Error("checkpoint truncated in section header");
    const std::string tag = bytes.substr(pos, 4);
    pos += 4;
    const auto length = detail::get_le<std::uint64_t>(bytes, pos);
    if (pos + length > bytes.size()) throw Error("checkpoint section " + tag + " truncated");
    const std::size_t end = pos + length;
    if (tag == "MRGN") {
      MarginState m;
      m.shared = detail::get_le<std::uint32_t>(bytes, pos) != 0;
      const auto count = detail::get_le<std::uint32_t>(bytes, pos);
      m.values.resize(count);
      for (auto& b : m.values) b = detail::get_le<double>(bytes, pos);
      ck.margins = std::move(m);
    }
    pos = end;  // unknown sections are skipped
  }
  return ck;
}

/// 64-bit FNV-1a, used as the config fingerprint.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

inline nlohmann::ordered_json backbone_to_json(const BackboneConfig& b) {
  return {{"kind", to_string(b.kind)},
          {"layers", b.layers},
          {"noise_eps", b.noise_eps},
          {"contrast_layer", b.contrast_layer},
          {"infonce_weight", b.infonce_weight},
          {"infonce_temperature", b.infonce_temperature}};
}

inline BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig b;
  b.kind = backbone_from_string(j.at("kind").get<std::string>());
  b.layers = j.value("layers", b.layers);
  b.noise_eps = j.value("noise_eps", b.noise_eps);
  b.contrast_layer = j.value("contrast_layer", b.contrast_layer);
  b.infonce_weight = j.value("infonce_weight", b.infonce_weight);
  b.infonce_temperature = j.value("infonce_temperature", b.infonce_temperature);
  return b;
}

struct CheckpointMeta {
  int epoch = 0;
  double metric = 0.0;
  std::string config_hash;
  BackboneConfig backbone;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const EmbeddingTable& table,
                            const MarginState* margins, const CheckpointMeta& meta) {
  write_file_atomic(path, encode_checkpoint(table, margins), true);
  nlohmann::ordered_json j;
  j["epoch"] = meta.epoch;
  j["metric"] = meta.metric;
  j["config_hash"] = meta.config_hash;
  j["backbone"] = backbone_to_json(meta.backbone);
  write_file_atomic(sidecar_path(path), j.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

/// Reads the sidecar; a missing sidecar yields an MF backbone.
inline CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path) {
  CheckpointMeta meta;
  meta.backbone.kind = BackboneKind::kMf;
  std::ifstream in(sidecar_path(path));
  if (!in) return meta;
  try {
    auto j = nlohmann::json::parse(in);
    meta.epoch = j.value("epoch", 0);
    meta.metric = j.value("metric", 0.0);
    meta.config_hash = j.value("config_hash", std::string{});
    if (j.contains("backbone")) meta.backbone = backbone_from_json(j["backbone"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid checkpoint sidecar: " + std::string(e.what()));
  }
  return meta;
}

}  // namespace drrl
