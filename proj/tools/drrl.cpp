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

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "drrl/commands.hpp"

namespace {

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    drrl::write_file_atomic(path, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DrRL collaborative-filtering training and verification"};
  app.require_subcommand(1);

  drrl::SplitOptions split_opt;
  std::string split_input, split_output;
  auto* split = app.add_subcommand("split", "Split an interaction log into train/validation/test");
  split->add_option("--kind", split_opt.kind, "iid, temporal or noise")
      ->check(CLI::IsMember({"iid", "temporal", "noise"}));
  split->add_option("--train", split_opt.train, "train+validation share per user (iid, noise)");
  split->add_option("--val", split_opt.val, "validation share of train+validation");
  split->add_option("--test", split_opt.test, "most recent share per user (temporal)");
  split->add_option("--seed", split_opt.seed);
  split->add_option("--kcore", split_opt.kcore, "k-core filter before splitting (0: off)");
  split->add_option("input", split_input, "interaction file")->required();
  split->add_option("output", split_output, "output directory")->required();

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train one run or a grid of runs from a config");
  train->add_option("--config", config_path)->required();

  drrl::EvaluateOptions eval_opt;
  std::string eval_ckpt, eval_split, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Full-ranking Recall@K and NDCG@K");
  evaluate->add_option("--checkpoint", eval_ckpt)->required();
  evaluate->add_option("--split", eval_split)->required();
  evaluate->add_option("--ks", eval_opt.ks)->delimiter(',');
  evaluate->add_option("--target", eval_opt.target)->check(CLI::IsMember({"test", "validation"}));
  evaluate->add_option("--output", eval_out, "CSV path (default stdout)");

  drrl::StatsOptions stats_opt;
  std::string stats_ckpt, stats_split, stats_loss = "sl", stats_out, stats_summary;
  auto& spec = stats_opt.spec;
  auto* stats = app.add_subcommand("stats", "Per-user worst-case weight and truncation diagnostics");
  stats->add_option("--checkpoint", stats_ckpt)->required();
  stats->add_option("--split", stats_split)->required();
  stats->add_option("--loss", stats_loss, "sl, ccl or drrl");
  stats->add_option("--tau", spec.tau);
  stats->add_option("--alpha", spec.alpha);
  stats->add_option("--beta", spec.beta);
  stats->add_option("--gamma-star", spec.gamma_star);
  stats->add_option("--c", spec.c);
  stats->add_option("--eps", spec.eps);
  stats->add_option("--output", stats_out, "per-user CSV path (default stdout)");
  stats->add_option("--summary", stats_summary, "summary JSON path (default stderr)");

  drrl::VerifyOptions verify_opt;
  std::string suite = "all", verify_out;
  std::size_t verify_n = 0;
  double verify_gamma = 0.0, verify_eta = -1.0, verify_tol = 0.0;
  auto* verify = app.add_subcommand("verify", "Run the numerical certification suites");
  std::vector<std::string> suites = drrl::verify_suites();
  suites.push_back("all");
  verify->add_option("--suite", suite)->check(CLI::IsMember(suites));
  verify->add_option("--seed", verify_opt.seed);
  verify->add_option("--instances", verify_opt.instances, "instance count (0: suite default)");
  verify->add_option("--n", verify_n, "fix the instance size");
  verify->add_option("--gamma", verify_gamma, "fix the divergence order");
  verify->add_option("--eta", verify_eta, "fix the ball radius");
  auto* tol_opt = verify->add_option("--tol", verify_tol, "override the suite's main tolerance");
  verify->add_option("--output", verify_out, "JSON report path (default stdout)");

  drrl::BlockDatasetConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a seeded block-structured interaction log");
  synth->add_option("--users", synth_cfg.users);
  synth->add_option("--items", synth_cfg.items);
  synth->add_option("--blocks", synth_cfg.blocks);
  synth->add_option("--per-user", synth_cfg.per_user);
  synth->add_option("--cross-block", synth_cfg.cross_block);
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("output", synth_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split) {
      split_opt.input = split_input;
      split_opt.output = split_output;
      std::cout << drrl::cmd_split(split_opt).dump(2) << '\n';
    } else if (*train) {
      drrl::cmd_train(config_path, std::cerr);
    } else if (*evaluate) {
      eval_opt.checkpoint = eval_ckpt;
      eval_opt.split = eval_split;
      write_or_print(eval_out, drrl::cmd_evaluate(eval_opt));
    } else if (*stats) {
      stats_opt.checkpoint = stats_ckpt;
      stats_opt.split = stats_split;
      spec.kind = drrl::loss_from_string(stats_loss);
      auto out = drrl::cmd_stats(stats_opt);
      write_or_print(stats_out, out.csv);
      if (stats_summary.empty()) {
        std::cerr << out.summary.dump(2) << '\n';
      } else {
        drrl::write_file_atomic(stats_summary, out.summary.dump(2) + "\n");
      }
    } else if (*verify) {
      if (verify_n > 0) verify_opt.n = verify_n;
      if (verify_gamma > 0.0) verify_opt.gamma = verify_gamma;
      if (verify_eta >= 0.0) verify_opt.eta = verify_eta;
      if (tol_opt->count() > 0) verify_opt.tolerance = verify_tol;
      const auto rep = drrl::cmd_verify(suite, verify_opt);
      write_or_print(verify_out, rep.json.dump(2) + "\n");
      std::cerr << rep.checks - rep.failures << "/" << rep.checks << " checks passed\n";
      return rep.failures == 0 ? 0 : 1;
    } else if (*synth) {
      drrl::cmd_synth(synth_cfg, synth_out);
    }
  } catch (const drrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
