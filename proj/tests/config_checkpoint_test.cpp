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

#include <cstring>
#include <map>

#include <gtest/gtest.h>

#include "drrl/checkpoint.hpp"
#include "drrl/config.hpp"
#include "test_util.hpp"

namespace drrl {
namespace {

const char* kMinimal = R"(
[data]
split_dir = splits/demo
[loss]
kind = sl
tau = 0.2
[output]
dir = runs/demo
)";

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& p : e.problems()) {
    if (p.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(Config, MinimalConfigGetsDefaults) {
  const auto rc = build_run_config(parse_config_text(kMinimal));
  EXPECT_EQ(rc.loss.kind, LossKind::kSoftmax);
  EXPECT_DOUBLE_EQ(rc.loss.tau, 0.2);
  EXPECT_EQ(rc.backbone.kind, BackboneKind::kMf);
  EXPECT_EQ(rc.train.batch_size, 1024u);
  EXPECT_EQ(rc.train.n_neg, 1024u);
  EXPECT_EQ(rc.train.patience, 25);
  EXPECT_EQ(rc.ks, (std::vector<std::size_t>{20}));
}

TEST(Config, MissingRequiredKeyIsNamed) {
  try {
    build_run_config(parse_config_text("[loss]\nkind = bpr\n[output]\ndir = x\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "data.split_dir"));
  }
}

TEST(Config, ReportsEveryProblemAtOnce) {
  try {
    parse_config_text("[data]\nsplit_dir = a\nbogus = 1\nsplit_dir = b\n[model]\nnope = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems().size(), 3u);
    EXPECT_TRUE(mentions(e, "data.bogus"));
    EXPECT_TRUE(mentions(e, "duplicate"));
    EXPECT_TRUE(mentions(e, "model.nope"));
  }
  try {
    build_run_config(parse_config_text(
        "[data]\nsplit_dir = a\n[loss]\nkind = drrl\n[train]\nlr = fast\nbatch_size = -3\n[output]\ndir = o\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.problems().size(), 2u);
    EXPECT_TRUE(mentions(e, "train.lr"));
    EXPECT_TRUE(mentions(e, "train.batch_size"));
  }
}

TEST(Config, RangeChecksRunOnParsedValues) {
  auto raw = parse_config_text(kMinimal);
  raw.values["loss.tau"] = "-1";
  try {
    build_run_config(raw);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "tau must be > 0"));
  }
}

TEST(Config, KeyOutsideSection) {
  EXPECT_THROW(parse_config_text("kind = sl\n"), ConfigError);
}

TEST(Config, GammaConvertsToGammaStar) {
  auto raw = parse_config_text(kMinimal);
  raw.values["loss.kind"] = "drrl";
  raw.values["loss.gamma"] = "1.25";
  EXPECT_DOUBLE_EQ(build_run_config(raw).loss.gamma_star, 5.0);
  raw.values["loss.gamma_star"] = "2";
  EXPECT_THROW(build_run_config(raw), ConfigError);
}

TEST(Config, RoundTripThroughText) {
  auto raw = parse_config_text(kMinimal);
  raw.values["loss.kind"] = "drrl";
  raw.values["loss.gamma_star"] = "3.5";
  raw.values["loss.lr_beta"] = "0.001";
  raw.values["model.backbone"] = "xsimgcl";
  raw.values["train.weight_decay"] = "1e-06";
  raw.values["eval.ks"] = "5,10,20";
  const auto rc = build_run_config(raw);
  const auto text = to_text(rc);
  const auto again = build_run_config(parse_config_text(text));
  EXPECT_EQ(to_text(again), text);
  EXPECT_EQ(again.ks, (std::vector<std::size_t>{5, 10, 20}));
  EXPECT_DOUBLE_EQ(again.train.weight_decay, 1e-6);
  EXPECT_EQ(to_json(again)["loss"]["gamma_star"], "3.5");
}

TEST(Config, EnvironmentOverrides) {
  auto raw = parse_config_text(kMinimal);
  std::map<std::string, std::string> env{{"DRRL_LOSS_TAU", "0.07"}, {"DRRL_TRAIN_SEED", "9"}};
  apply_env_overrides(raw, [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  const auto rc = build_run_config(raw);
  EXPECT_DOUBLE_EQ(rc.loss.tau, 0.07);
  EXPECT_EQ(rc.train.seed, 9u);
}

TEST(Config, GridExpansion) {
  auto raw = parse_config_text(kMinimal);
  raw.values["loss.kind"] = "drrl";
  raw.values["loss.gamma"] = "1.05,1.1,1.15";
  raw.values["train.lr"] = "0.001, 0.01";
  raw.values["eval.ks"] = "10,20";
  const auto grid = expand_grid(raw);
  ASSERT_EQ(grid.size(), 6u);
  for (const auto& g : grid) EXPECT_EQ(g.values.at("eval.ks"), "10,20");
  EXPECT_EQ(grid[0].values.at("loss.gamma"), "1.05");
}

TEST(Config, LoadFileAppliesGrid) {
  testing::TempDir dir;
  testing::write_text(dir / "grid.cfg", std::string(kMinimal) + "[train]\nseed = 1,2\n");
  const auto runs = load_run_configs(dir / "grid.cfg");
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[1].train.seed, 2u);
}

TEST(Config, ShippedPresetsValidate) {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(DRRL_PRESET_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    ++count;
    const auto name = entry.path().stem().string();
    std::vector<RunConfig> runs;
    ASSERT_NO_THROW(runs = load_run_configs(entry.path())) << name;
    const bool grid = name.find("_grid") != std::string::npos;
    EXPECT_EQ(runs.size(), grid ? 31u : 1u) << name;
    EXPECT_EQ(runs.front().train.batch_size, 1024u);
    if (runs.front().loss.kind == LossKind::kDrrl && name.find("_ood") == std::string::npos) {
      EXPECT_DOUBLE_EQ(runs.front().loss.c, 1.0) << name;
    }
  }
  EXPECT_EQ(count, 92u);
  const auto sl = load_run_configs(std::filesystem::path(DRRL_PRESET_DIR) / "gowalla-mf-sl.cfg");
  EXPECT_DOUBLE_EQ(sl.front().loss.tau, 0.09);
  EXPECT_DOUBLE_EQ(sl.front().train.lr, 1e-2);
}

EmbeddingTable sample_table() {
  EmbeddingTable t(3, 2, 4);
  for (std::size_t k = 0; k < t.values.size(); ++k) t.values[k] = 0.25 * static_cast<double>(k) - 1.0;
  return t;
}

TEST(Checkpoint, RoundTripWithMargins) {
  const auto t = sample_table();
  MarginState m(3, 0.0);
  m.values = {0.1, -0.3, 0.77};
  const auto ck = decode_checkpoint(encode_checkpoint(t, &m));
  EXPECT_EQ(ck.table.num_users, 3);
  EXPECT_EQ(ck.table.num_items, 2);
  EXPECT_EQ(ck.table.dim, 4);
  EXPECT_EQ(ck.table.values, t.values);  // exactly representable in float
  ASSERT_TRUE(ck.margins.has_value());
  EXPECT_EQ(ck.margins->values, m.values);
  EXPECT_FALSE(ck.margins->shared);
}

TEST(Checkpoint, LayoutIsLittleEndianFloat) {
  const auto bytes = encode_checkpoint(sample_table(), nullptr);
  ASSERT_EQ(bytes.size(), 20u + 4u * 20u);
  EXPECT_EQ(bytes.substr(0, 4), "DRRL");
  float first;
  std::memcpy(&first, bytes.data() + 20, 4);
  EXPECT_EQ(first, -1.0f);
  EXPECT_FALSE(decode_checkpoint(bytes).margins.has_value());
}

TEST(Checkpoint, SkipsUnknownSectionsAndRejectsCorruption) {
  auto bytes = encode_checkpoint(sample_table(), nullptr);
  bytes += "XTRA";
  const std::uint64_t len = 3;
  bytes.append(reinterpret_cast<const char*>(&len), 8);
  bytes += "abc";
  EXPECT_NO_THROW(decode_checkpoint(bytes));
  EXPECT_THROW(decode_checkpoint("NOPE" + bytes.substr(4)), Error);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 50)), Error);
}

TEST(Checkpoint, SidecarCarriesBackbone) {
  testing::TempDir dir;
  CheckpointMeta meta;
  meta.epoch = 12;
  meta.metric = 0.4;
  meta.config_hash = hex64(fnv1a64("cfg"));
  meta.backbone.kind = BackboneKind::kLightGcn;
  meta.backbone.layers = 3;
  save_checkpoint(dir / "ck.bin", sample_table(), nullptr, meta);
  const auto back = load_checkpoint_meta(dir / "ck.bin");
  EXPECT_EQ(back.epoch, 12);
  EXPECT_EQ(back.backbone.kind, BackboneKind::kLightGcn);
  EXPECT_EQ(back.backbone.layers, 3);
  EXPECT_EQ(back.config_hash.size(), 16u);
  EXPECT_EQ(load_checkpoint(dir / "ck.bin").table.values, sample_table().values);
}

TEST(Checkpoint, Fnv1aKnownValue) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace drrl
