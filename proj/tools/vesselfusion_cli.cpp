// Copyright 2026 The VesselFusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line front end over the C API.
//
//   vesselfusion synth   OUT_DIR
//   vesselfusion train   DATA_DIR CKPT
//   vesselfusion extract CKPT VOLUME OUT
//   vesselfusion extract CKPT --data DATA_DIR [--split test] --out-dir DIR
//   vesselfusion eval    PRED_DIR GT_DIR [--split test] [--out metrics.csv]
//   vesselfusion sweep   CKPT DATA_DIR [--out-prefix sweep]
//   vesselfusion config  (prints the effective configuration)
//
// Shared flags: --config PATH, --set KEY=VALUE (repeatable), --seed N, --force.
// Exit status: 0 success, 2 usage error, 3 data/format error, 4 divergence.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vesselfusion/vesselfusion.h"

namespace {

struct ConfigHandle {
  vf_config* cfg = nullptr;
  ~ConfigHandle() { vf_config_destroy(cfg); }
};

int report(vf_status status) {
  if (status != VF_OK) std::fprintf(stderr, "vesselfusion: error: %s\n", vf_last_error());
  return static_cast<int>(status);
}

struct SharedFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<unsigned long long> seed;
};

void add_shared(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value configuration file");
  cmd->add_option("--set", flags.overrides, "override one key, KEY=VALUE (repeatable)");
  cmd->add_option("--seed", flags.seed, "override the seed used by this command");
}

/// Builds the effective configuration. seed_key names the key that --seed overrides.
vf_status build_config(const SharedFlags& flags, const char* seed_key, ConfigHandle& out) {
  vf_status s = flags.config_path.empty() ? vf_config_create(&out.cfg)
                                          : vf_config_load(flags.config_path.c_str(), &out.cfg);
  if (s != VF_OK) return s;
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "vesselfusion: error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
      return VF_ERR_USAGE;
    }
    s = vf_config_set(out.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != VF_OK) return s;
  }
  if (flags.seed && seed_key) {
    s = vf_config_set(out.cfg, seed_key, std::to_string(*flags.seed).c_str());
    if (s != VF_OK) return s;
  }
  return vf_config_validate(out.cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vessel centerline extraction by set diffusion with coarse-to-fine point codes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vf_version());

  SharedFlags flags;
  bool force = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic vessel dataset");
  std::string synth_out;
  synth->add_option("out_dir", synth_out, "output directory")->required();
  synth->add_flag("--force", force, "write into a non-empty directory");
  add_shared(synth, flags);

  CLI::App* train = app.add_subcommand("train", "train the denoiser on a dataset");
  std::string train_data;
  std::string train_ckpt;
  bool quiet = false;
  train->add_option("data_dir", train_data, "dataset directory")->required();
  train->add_option("ckpt", train_ckpt, "checkpoint to write")->required();
  train->add_flag("--quiet", quiet, "suppress per-epoch progress");
  add_shared(train, flags);

  CLI::App* extract = app.add_subcommand("extract", "extract centerlines with a trained checkpoint");
  std::string extract_ckpt;
  std::vector<std::string> extract_args;
  std::string extract_data;
  std::string extract_split = "test";
  std::string extract_out_dir;
  extract->add_option("ckpt", extract_ckpt, "checkpoint")->required();
  extract->add_option("files", extract_args, "VOLUME OUT for a single volume")->expected(0, 2);
  extract->add_option("--data", extract_data, "dataset directory, extracts a whole split");
  extract->add_option("--split", extract_split, "split to extract with --data: train, val, test or all");
  extract->add_option("--out-dir", extract_out_dir, "output directory with --data");
  add_shared(extract, flags);

  CLI::App* eval = app.add_subcommand("eval", "score predicted centerlines against a dataset");
  std::string eval_pred;
  std::string eval_gt;
  std::string eval_split = "test";
  std::string eval_out = "metrics.csv";
  eval->add_option("pred_dir", eval_pred, "directory with <case_id>.txt predictions")->required();
  eval->add_option("gt_dir", eval_gt, "dataset directory")->required();
  eval->add_option("--split", eval_split, "cases to score: train, val, test or all");
  eval->add_option("--out", eval_out, "metrics CSV to write");
  add_shared(eval, flags);

  CLI::App* sweep = app.add_subcommand("sweep", "F1 and Betti-0 of the test split as K varies");
  std::string sweep_ckpt;
  std::string sweep_data;
  std::string sweep_prefix = "sweep";
  sweep->add_option("ckpt", sweep_ckpt, "checkpoint")->required();
  sweep->add_option("data_dir", sweep_data, "dataset directory")->required();
  sweep->add_option("--out-prefix", sweep_prefix, "writes PREFIX.csv, PREFIX.svg and PREFIX.config.txt");
  add_shared(sweep, flags);

  CLI::App* config = app.add_subcommand("config", "print the effective configuration");
  std::string config_out;
  config->add_option("--out", config_out, "write to a file instead of stdout");
  add_shared(config, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return VF_ERR_USAGE;
  }

  ConfigHandle cfg;
  if (synth->parsed()) {
    if (vf_status s = build_config(flags, "synth_seed", cfg)) return report(s);
    return report(vf_cmd_synth(cfg.cfg, synth_out.c_str(), force ? 1 : 0));
  }
  if (train->parsed()) {
    if (vf_status s = build_config(flags, "train_seed", cfg)) return report(s);
    return report(vf_cmd_train(cfg.cfg, train_data.c_str(), train_ckpt.c_str(), quiet ? 0 : 1));
  }
  if (extract->parsed()) {
    if (vf_status s = build_config(flags, "seed", cfg)) return report(s);
    if (!extract_data.empty()) {
      if (!extract_args.empty() || extract_out_dir.empty()) {
        std::fprintf(stderr, "vesselfusion: error: --data takes --out-dir and no VOLUME OUT\n");
        return VF_ERR_USAGE;
      }
      return report(vf_cmd_extract_split(cfg.cfg, extract_ckpt.c_str(), extract_data.c_str(),
                                         extract_split.c_str(), extract_out_dir.c_str(), 1));
    }
    if (extract_args.size() != 2) {
      std::fprintf(stderr, "vesselfusion: error: extract needs VOLUME OUT or --data DIR --out-dir DIR\n");
      return VF_ERR_USAGE;
    }
    return report(vf_cmd_extract(cfg.cfg, extract_ckpt.c_str(), extract_args[0].c_str(),
                                 extract_args[1].c_str()));
  }
  if (eval->parsed()) {
    if (vf_status s = build_config(flags, nullptr, cfg)) return report(s);
    int degenerate = 0;
    const vf_status s = vf_cmd_eval(cfg.cfg, eval_pred.c_str(), eval_gt.c_str(), eval_split.c_str(),
                                    eval_out.c_str(), &degenerate);
    if (s == VF_OK && degenerate > 0) {
      std::fprintf(stderr, "vesselfusion: note: %d case(s) had an empty prediction (precision 0)\n",
                   degenerate);
    }
    return report(s);
  }
  if (sweep->parsed()) {
    if (vf_status s = build_config(flags, "seed", cfg)) return report(s);
    return report(vf_cmd_sweep(cfg.cfg, sweep_ckpt.c_str(), sweep_data.c_str(), sweep_prefix.c_str(), 1));
  }
  if (config->parsed()) {
    if (vf_status s = build_config(flags, nullptr, cfg)) return report(s);
    if (!config_out.empty()) return report(vf_config_write(cfg.cfg, config_out.c_str()));
    size_t needed = 0;
    if (vf_status s = vf_config_echo(cfg.cfg, nullptr, 0, &needed)) return report(s);
    std::string text(needed, '\0');
    if (vf_status s = vf_config_echo(cfg.cfg, text.data(), text.size(), &needed)) return report(s);
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  return VF_ERR_USAGE;
}
