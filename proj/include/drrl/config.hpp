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

// Run configuration: flat `key = value` text grouped under [section]
// headers. Every key is registered; unknown keys are rejected and all
// problems are reported in one error. A comma-separated value expands into a
// grid of runs (except eval.ks, which is a list). Environment variables of
// the form DRRL_<SECTION>_<KEY> override file values.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "drrl/common.hpp"
#include "drrl/dataio.hpp"
#include "drrl/graph_model.hpp"
#include "drrl/losses.hpp"
#include "drrl/trainer.hpp"

namespace drrl {

/// Configuration problems, all of them.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& x : p) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

struct ConfigKey {
  const char* name;           // section.key
  const char* default_value;  // nullptr: required; "": optional, unset
};

inline const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = {
      {"data.split_dir", nullptr},
      {"data.noise_ratio", "0"},
      {"data.noise_pool", "held_out"},
      {"model.backbone", "mf"},
      {"model.dim", "64"},
      {"model.layers", "2"},
      {"model.noise_eps", "0.2"},
      {"model.contrast_layer", "1"},
      {"model.infonce_weight", "0.001"},
      {"model.infonce_temperature", "0.2"},
      {"model.init_std", "0.1"},
      {"loss.kind", nullptr},
      {"loss.tau", "0.2"},
      {"loss.alpha", "1"},
      {"loss.beta", "0.5"},
      {"loss.gamma", ""},
      {"loss.gamma_star", ""},
      {"loss.c", "1"},
      {"loss.eps", "1e-10"},
      {"loss.beta0", "0.5"},
      {"loss.lr_beta", "0.0001"},
      {"loss.margin_mode", "personalized"},
      {"train.batch_size", "1024"},
      {"train.n_neg", "1024"},
      {"train.lr", "0.001"},
      {"train.weight_decay", "0"},
      {"train.max_epochs", "300"},
      {"train.patience", "25"},
      {"train.eval_every", "1"},
      {"train.seed", "0"},
      {"train.steps_per_epoch", "0"},
      {"eval.ks", "20"},
      {"output.dir", nullptr},
  };
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_registry()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

/// Parsed but untyped configuration, keyed by "section.key".
struct RawConfig {
  std::map<std::string, std::string> values;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::string env_name(const std::string& key) {
  std::string s = "DRRL_";
  for (char c : key) s += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
    if (std::strtod(shorter, nullptr) == x) return shorter;
  }
  return buf;
}

}  // namespace detail

inline RawConfig parse_config_text(std::string_view text) {
  RawConfig raw;
  std::vector<std::string> problems;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']') {
        problems.push_back(where + "unterminated section header");
        continue;
      }
      section = detail::trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (section.empty()) {
      problems.push_back(where + "key '" + key + "' outside any [section]");
      continue;
    }
    const std::string full = section + "." + key;
    if (find_config_key(full) == nullptr) {
      problems.push_back(where + "unknown key '" + full + "'");
      continue;
    }
    if (raw.values.count(full)) {
      problems.push_back(where + "duplicate key '" + full + "'");
      continue;
    }
    raw.values[full] = value;
  }
  if (!problems.empty()) throw ConfigError(problems);
  return raw;
}

inline RawConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Applies DRRL_<SECTION>_<KEY> variables. `getenv_fn` is injectable for tests.
inline void apply_env_overrides(
    RawConfig& raw, const std::function<const char*(const char*)>& getenv_fn = std::getenv) {
  for (const auto& k : config_registry()) {
    const auto name = detail::env_name(k.name);
    if (const char* v = getenv_fn(name.c_str()); v != nullptr) raw.values[k.name] = v;
  }
}

/// Cartesian product over comma-separated values, in registry key order.
inline std::vector<RawConfig> expand_grid(const RawConfig& raw) {
  std::vector<RawConfig> out{RawConfig{}};
  for (const auto& k : config_registry()) {
    auto it = raw.values.find(k.name);
    if (it == raw.values.end()) continue;
    std::vector<std::string> options{it->second};
    if (std::string(k.name) != "eval.ks" && it->second.find(',') != std::string::npos) {
      options = detail::split_list(it->second);
    }
    std::vector<RawConfig> next;
    for (const auto& base : out) {
      for (const auto& opt : options) {
        RawConfig c = base;
        c.values[k.name] = opt;
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

/// A validated, typed run.
struct RunConfig {
  std::string split_dir;
  std::string output_dir;
  BackboneConfig backbone;
  LossSpec loss;
  TrainConfig train;
  std::vector<std::size_t> ks;
};

inline RunConfig build_run_config(const RawConfig& raw) {
  std::vector<std::string> problems;
  auto get = [&](const char* name) -> std::string {
    auto it = raw.values.find(name);
    if (it != raw.values.end()) return it->second;
    const auto* k = find_config_key(name);
    if (k->default_value == nullptr) {
      problems.push_back("missing required key '" + std::string(name) + "'");
      return {};
    }
    return k->default_value;
  };
  auto as_double = [&](const char* name) {
    const auto s = get(name);
    if (s.empty()) return 0.0;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      problems.push_back(std::string(name) + ": expected a number, got '" + s + "'");
    }
    return v;
  };
  auto as_int = [&](const char* name) -> long long {
    const auto s = get(name);
    if (s.empty()) return 0;
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      problems.push_back(std::string(name) + ": expected an integer, got '" + s + "'");
    }
    return v;
  };
  auto as_count = [&](const char* name) -> long long {
    const auto v = as_int(name);
    if (v < 0) problems.push_back(std::string(name) + ": must be >= 0");
    return v;
  };
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      problems.push_back(std::string(name) + ": " + e.what());
    }
  };

  RunConfig rc;
  rc.split_dir = get("data.split_dir");
  rc.output_dir = get("output.dir");
  rc.train.noise.ratio = as_double("data.noise_ratio");
  {
    const auto pool = get("data.noise_pool");
    if (pool == "held_out") {
      rc.train.noise.pool = NoisePool::kHeldOut;
    } else if (pool == "train_positives") {
      rc.train.noise.pool = NoisePool::kTrainPositives;
    } else {
      problems.push_back("data.noise_pool: expected held_out|train_positives, got '" + pool + "'");
    }
  }
  guarded("model.backbone", [&] { rc.backbone.kind = backbone_from_string(get("model.backbone")); });
  rc.train.dim = static_cast<Index>(as_count("model.dim"));
  rc.backbone.layers = static_cast<int>(as_count("model.layers"));
  rc.backbone.noise_eps = as_double("model.noise_eps");
  rc.backbone.contrast_layer = static_cast<int>(as_count("model.contrast_layer"));
  rc.backbone.infonce_weight = as_double("model.infonce_weight");
  rc.backbone.infonce_temperature = as_double("model.infonce_temperature");
  rc.train.init_std = as_double("model.init_std");

  if (const auto kind = get("loss.kind"); !kind.empty()) {
    guarded("loss.kind", [&] { rc.loss.kind = loss_from_string(kind); });
  }
  rc.loss.tau = as_double("loss.tau");
  rc.loss.alpha = as_double("loss.alpha");
  rc.loss.beta = as_double("loss.beta");
  const bool has_gamma = !get("loss.gamma").empty();
  const bool has_gamma_star = !get("loss.gamma_star").empty();
  if (has_gamma && has_gamma_star) {
    problems.push_back("loss.gamma and loss.gamma_star are mutually exclusive");
  } else if (has_gamma) {
    const double g = as_double("loss.gamma");
    if (!(g > 1.0)) {
      problems.push_back("loss.gamma: must be > 1");
    } else {
      rc.loss.gamma_star = g / (g - 1.0);
    }
  } else if (has_gamma_star) {
    rc.loss.gamma_star = as_double("loss.gamma_star");
  }
  rc.loss.c = as_double("loss.c");
  rc.loss.eps = as_double("loss.eps");
  rc.loss.beta0 = as_double("loss.beta0");
  rc.loss.lr_beta = as_double("loss.lr_beta");
  guarded("loss.margin_mode",
          [&] { rc.loss.margin_mode = margin_mode_from_string(get("loss.margin_mode")); });

  rc.train.batch_size = static_cast<std::size_t>(as_count("train.batch_size"));
  rc.train.n_neg = static_cast<std::size_t>(as_count("train.n_neg"));
  rc.train.lr = as_double("train.lr");
  rc.train.weight_decay = as_double("train.weight_decay");
  rc.train.max_epochs = static_cast<int>(as_int("train.max_epochs"));
  rc.train.patience = static_cast<int>(as_int("train.patience"));
  rc.train.eval_every = static_cast<int>(as_int("train.eval_every"));
  rc.train.seed = static_cast<std::uint64_t>(as_count("train.seed"));
  rc.train.steps_per_epoch = static_cast<std::size_t>(as_count("train.steps_per_epoch"));

  for (const auto& s : detail::split_list(get("eval.ks"))) {
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
    if (ec != std::errc() || p != s.data() + s.size() || k == 0) {
      problems.push_back("eval.ks: expected positive integers, got '" + s + "'");
    } else {
      rc.ks.push_back(k);
    }
  }

  if (problems.empty()) {
    guarded("model", [&] { rc.backbone.validate(); });
    guarded("loss", [&] { rc.loss.validate(); });
    guarded("train", [&] { rc.train.validate(); });
  }
  if (!problems.empty()) throw ConfigError(problems);
  return rc;
}

/// Canonical text form; parsing it back yields the same RunConfig.
inline std::string to_text(const RunConfig& rc) {
  using detail::format_double;
  std::ostringstream o;
  o << "[data]\n"
    << "split_dir = " << rc.split_dir << "\n"
    << "noise_ratio = " << format_double(rc.train.noise.ratio) << "\n"
    << "noise_pool = "
    << (rc.train.noise.pool == NoisePool::kHeldOut ? "held_out" : "train_positives") << "\n\n"
    << "[model]\n"
    << "backbone = " << to_string(rc.backbone.kind) << "\n"
    << "dim = " << rc.train.dim << "\n"
    << "layers = " << rc.backbone.layers << "\n"
    << "noise_eps = " << format_double(rc.backbone.noise_eps) << "\n"
    << "contrast_layer = " << rc.backbone.contrast_layer << "\n"
    << "infonce_weight = " << format_double(rc.backbone.infonce_weight) << "\n"
    << "infonce_temperature = " << format_double(rc.backbone.infonce_temperature) << "\n"
    << "init_std = " << format_double(rc.train.init_std) << "\n\n"
    << "[loss]\n"
    << "kind = " << to_string(rc.loss.kind) << "\n"
    << "tau = " << format_double(rc.loss.tau) << "\n"
    << "alpha = " << format_double(rc.loss.alpha) << "\n"
    << "beta = " << format_double(rc.loss.beta) << "\n"
    << "gamma_star = " << format_double(rc.loss.gamma_star) << "\n"
    << "c = " << format_double(rc.loss.c) << "\n"
    << "eps = " << format_double(rc.loss.eps) << "\n"
    << "beta0 = " << format_double(rc.loss.beta0) << "\n"
    << "lr_beta = " << format_double(rc.loss.lr_beta) << "\n"
    << "margin_mode = " << to_string(rc.loss.margin_mode) << "\n\n"
    << "[train]\n"
    << "batch_size = " << rc.train.batch_size << "\n"
    << "n_neg = " << rc.train.n_neg << "\n"
    << "lr = " << format_double(rc.train.lr) << "\n"
    << "weight_decay = " << format_double(rc.train.weight_decay) << "\n"
    << "max_epochs = " << rc.train.max_epochs << "\n"
    << "patience = " << rc.train.patience << "\n"
    << "eval_every = " << rc.train.eval_every << "\n"
    << "seed = " << rc.train.seed << "\n"
    << "steps_per_epoch = " << rc.train.steps_per_epoch << "\n\n"
    << "[eval]\n"
    << "ks = ";
  for (std::size_t k = 0; k < rc.ks.size(); ++k) o << (k ? "," : "") << rc.ks[k];
  o << "\n\n[output]\n"
    << "dir = " << rc.output_dir << "\n";
  return o.str();
}

inline nlohmann::ordered_json to_json(const RunConfig& rc) {
  nlohmann::ordered_json j;
  for (const auto& [key, value] : parse_config_text(to_text(rc)).values) {
    const auto dot = key.find('.');
    j[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return j;
}

/// Loads a config file, applies environment overrides, expands the grid and
/// validates every grid point.
inline std::vector<RunConfig> load_run_configs(const std::filesystem::path& path) {
  auto raw = load_config_file(path);
  apply_env_overrides(raw);
  std::vector<RunConfig> runs;
  for (const auto& point : expand_grid(raw)) runs.push_back(build_run_config(point));
  return runs;
}

}  // namespace drrl
