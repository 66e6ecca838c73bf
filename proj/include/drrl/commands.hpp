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

// Subcommand bodies of the drrl tool. Argument parsing lives in tools/;
// everything here takes plain option structs so it can be driven from tests.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drrl/checkpoint.hpp"
#include "drrl/config.hpp"
#include "drrl/dataio.hpp"
#include "drrl/diagnostics.hpp"
#include "drrl/metrics.hpp"
#include "drrl/synthetic.hpp"
#include "drrl/trainer.hpp"
#include "drrl/verify.hpp"

namespace drrl {

namespace fs = std::filesystem;

struct SplitOptions {
  std::string kind = "iid";  // iid | temporal | noise
  double train = 0.8;        // iid/noise: train+validation share per user
  double val = 0.1;          // share of train+validation held for validation
  double test = 0.2;         // temporal: most recent share per user
  std::uint64_t seed = 0;
  int kcore = 0;
  fs::path input;
  fs::path output;
};

inline nlohmann::ordered_json cmd_split(const SplitOptions& o) {
  auto log = load_interactions(o.input);
  if (o.kcore > 0) log = k_core_filter(log, o.kcore);
  DatasetSplit split;
  if (o.kind == "iid") {
    split = split_iid(log, o.train, o.val, o.seed, SplitKind::kIid);
  } else if (o.kind == "noise") {
    split = split_iid(log, o.train, o.val, o.seed, SplitKind::kNoise);
  } else if (o.kind == "temporal") {
    split = split_temporal(log, o.test, o.val);
  } else {
    throw Error("unknown split kind '" + o.kind + "' (expected iid, temporal or noise)");
  }
  write_split(o.output, split, &log);
  nlohmann::ordered_json j;
  j["users"] = split.num_users;
  j["items"] = split.num_items;
  j["train"] = split.num_train();
  j["validation"] = split.count(split.validation);
  j["test"] = split.count(split.test);
  return j;
}

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream o;
  o << std::setprecision(10) << *v;
  return o.str();
}

inline std::string metric_rows(int epoch, const MetricReport& rep) {
  std::ostringstream o;
  o << std::setprecision(10);
  for (const auto& v : rep.values) o << epoch << ',' << v.metric << ',' << v.k << ',' << v.value << '\n';
  return o.str();
}

inline nlohmann::ordered_json report_json(const TrainReport& rep) {
  nlohmann::ordered_json j;
  j["best_epoch"] = rep.best_epoch;
  j["best_val_ndcg20"] = std::isfinite(rep.best_metric) ? nlohmann::ordered_json(rep.best_metric)
                                                         : nlohmann::ordered_json(nullptr);
  j["stop_reason"] = rep.stop_reason;
  if (!rep.diagnostics.empty()) j["diagnostics"] = rep.diagnostics;
  auto& ep = j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& r : rep.epochs) {
    nlohmann::ordered_json e;
    e["epoch"] = r.epoch;
    e["train_loss"] = r.train_loss;
    e["val_ndcg20"] = r.val_ndcg20 ? nlohmann::ordered_json(*r.val_ndcg20) : nullptr;
    e["val_recall20"] = r.val_recall20 ? nlohmann::ordered_json(*r.val_recall20) : nullptr;
    e["mean_margin"] = r.mean_margin;
    ep.push_back(std::move(e));
  }
  return j;
}

}  // namespace detail

struct TrainRunSummary {
  fs::path dir;
  TrainReport report;
  MetricReport test;
};

/// Trains every grid point of a config. A single run writes into the output
/// directory; a grid writes run_<k>/ subdirectories plus grid.json naming the
/// best run by validation NDCG@20.
inline std::vector<TrainRunSummary> cmd_train(const fs::path& config_path, std::ostream& log) {
  const auto runs = load_run_configs(config_path);
  std::vector<TrainRunSummary> out;
  const fs::path root = runs.front().output_dir;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& rc = runs[k];
    const fs::path dir = runs.size() == 1 ? fs::path(rc.output_dir)
                                          : fs::path(rc.output_dir) / ("run_" + std::to_string(k));
    fs::create_directories(dir);
    const auto text = to_text(rc);
    write_file_atomic(dir / "config.cfg", text);
    write_file_atomic(dir / "config.json", to_json(rc).dump(2) + "\n");

    auto split = read_split(rc.split_dir);
    TrainConfig tc = rc.train;
    log << "run " << k << ": " << to_string(rc.backbone.kind) << '/' << to_string(rc.loss.kind)
        << " on " << split.num_users << " users, " << split.num_items << " items\n";
    auto result = train(split, rc.backbone, rc.loss, tc, [&](const EpochRecord& r) {
      log << "  epoch " << r.epoch << " loss " << r.train_loss;
      if (r.val_ndcg20) log << " val_ndcg@20 " << *r.val_ndcg20;
      log << '\n';
    });

    CheckpointMeta meta;
    meta.epoch = result.report.best_epoch;
    meta.metric = std::isfinite(result.report.best_metric) ? result.report.best_metric : 0.0;
    meta.config_hash = hex64(fnv1a64(text));
    meta.backbone = rc.backbone;
    const MarginState* margins = rc.loss.kind == LossKind::kDrrl ? &result.margins : nullptr;
    save_checkpoint(dir / "checkpoint.bin", result.table, margins, meta);

    const auto graph = InteractionGraph::from_split(split);
    const auto repr = inference_representation(result.table, graph, rc.backbone);
    auto test = evaluate_split(repr, split, EvalTarget::kTest, rc.ks);

    auto rj = detail::report_json(result.report);
    auto& tj = rj["test"] = nlohmann::ordered_json::array();
    for (const auto& v : test.values) tj.push_back({{"metric", v.metric}, {"k", v.k}, {"value", v.value}});
    write_file_atomic(dir / "report.json", rj.dump(2) + "\n");

    std::ostringstream csv;
    csv << std::setprecision(10) << "epoch,train_loss,val_ndcg20,val_recall20,mean_margin\n";
    for (const auto& r : result.report.epochs) {
      csv << r.epoch << ',' << r.train_loss << ',' << detail::opt_cell(r.val_ndcg20) << ','
          << detail::opt_cell(r.val_recall20) << ',' << r.mean_margin << '\n';
    }
    write_file_atomic(dir / "report.csv", csv.str());
    write_file_atomic(dir / "metrics.csv",
                      "epoch,metric,K,value\n" + detail::metric_rows(result.report.best_epoch, test));
    out.push_back({dir, result.report, std::move(test)});
  }

  if (runs.size() > 1) {
    nlohmann::ordered_json g;
    std::size_t best = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out[k].report.best_metric > out[best].report.best_metric) best = k;
      g["runs"].push_back({{"dir", out[k].dir.filename().string()},
                           {"best_epoch", out[k].report.best_epoch},
                           {"val_ndcg20", std::isfinite(out[k].report.best_metric)
                                              ? nlohmann::ordered_json(out[k].report.best_metric)
                                              : nlohmann::ordered_json(nullptr)}});
    }
    g["best_run"] = out[best].dir.filename().string();
    write_file_atomic(root / "grid.json", g.dump(2) + "\n");
  }
  return out;
}

struct EvaluateOptions {
  fs::path checkpoint;
  fs::path split;
  std::vector<std::size_t> ks = {20};
  std::string target = "test";
};

/// Metric CSV: header plus one `epoch,metric,K,value` row per metric and K.
inline std::string cmd_evaluate(const EvaluateOptions& o) {
  const auto ck = load_checkpoint(o.checkpoint);
  const auto meta = load_checkpoint_meta(o.checkpoint);
  const auto split = read_split(o.split);
  EvalTarget target;
  if (o.target == "test") {
    target = EvalTarget::kTest;
  } else if (o.target == "validation") {
    target = EvalTarget::kValidation;
  } else {
    throw Error("unknown evaluation target '" + o.target + "' (expected test or validation)");
  }
  if (ck.table.num_users != split.num_users || ck.table.num_items != split.num_items) {
    // Checked here too so the graph build below never sees mismatched ids.
    evaluate_split(ck.table, split, target, o.ks);
  }
  const auto graph = InteractionGraph::from_split(split);
  const auto repr = inference_representation(ck.table, graph, meta.backbone);
  return "epoch,metric,K,value\n" +
         detail::metric_rows(meta.epoch, evaluate_split(repr, split, target, o.ks));
}

struct StatsOptions {
  fs::path checkpoint;
  fs::path split;
  LossSpec spec;
};

struct StatsOutput {
  std::string csv;  // one row per user
  nlohmann::ordered_json summary;
};

inline StatsOutput cmd_stats(const StatsOptions& o) {
  const auto ck = load_checkpoint(o.checkpoint);
  const auto meta = load_checkpoint_meta(o.checkpoint);
  const auto split = read_split(o.split);
  if (ck.table.num_users != split.num_users || ck.table.num_items != split.num_items) {
    throw Error("checkpoint has " + std::to_string(ck.table.num_users) + " users and " +
                std::to_string(ck.table.num_items) + " items, split has " +
                std::to_string(split.num_users) + " and " + std::to_string(split.num_items));
  }
  o.spec.validate();
  const auto graph = InteractionGraph::from_split(split);
  const auto repr = inference_representation(ck.table, graph, meta.backbone);
  const MarginState* margins = ck.margins ? &*ck.margins : nullptr;
  const auto s = compute_diagnostics(repr, split, o.spec, margins);

  StatsOutput out;
  std::ostringstream csv;
  csv << std::setprecision(10)
      << "user,n_neg,n_false_negatives,k1,k2,margin,truncation,learned_margin,learned_truncation\n";
  for (const auto& u : s.users) {
    csv << u.user << ',' << u.n_neg << ',' << u.n_false_negatives << ','
        << (u.weights.degenerate ? std::string() : detail::opt_cell(u.weights.k1)) << ','
        << detail::opt_cell(u.weights.k2) << ',' << detail::opt_cell(u.margin) << ','
        << detail::opt_cell(u.truncation) << ',' << detail::opt_cell(u.learned_margin) << ','
        << detail::opt_cell(u.learned_truncation) << '\n';
  }
  out.csv = csv.str();
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  out.summary["loss"] = to_string(o.spec.kind);
  out.summary["users"] = s.users.size();
  out.summary["mean_k1"] = s.mean_k1;
  out.summary["mean_k2"] = opt(s.mean_k2);
  out.summary["mean_truncation"] = opt(s.mean_truncation);
  out.summary["mean_learned_truncation"] = opt(s.mean_learned_truncation);
  return out;
}

struct VerifyReport {
  nlohmann::ordered_json json;
  std::size_t checks = 0;
  std::size_t failures = 0;
};

inline VerifyReport cmd_verify(const std::string& suite, const VerifyOptions& opt) {
  VerifyReport r;
  r.json["suite"] = suite;
  r.json["seed"] = opt.seed;
  auto& checks = r.json["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : run_verify_suite(suite, opt)) {
    ++r.checks;
    if (!c.passed) ++r.failures;
    checks.push_back(to_json(c));
  }
  r.json["total"] = r.checks;
  r.json["failed"] = r.failures;
  r.json["passed"] = r.failures == 0;
  return r;
}

inline void cmd_synth(const BlockDatasetConfig& cfg, const fs::path& output) {
  std::ostringstream o;
  write_interactions(o, make_block_dataset(cfg));
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_file_atomic(output, o.str());
}

}  // namespace drrl
