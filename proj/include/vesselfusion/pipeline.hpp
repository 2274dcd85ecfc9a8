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

#pragma once

// File-level commands behind the command line tool.
//
// Dataset directory layout written by cmd_synth:
//   <dir>/manifest.txt          "case_id V_x V_y V_z points" per case
//   <dir>/split.txt             "case_id train|val|test" per case
//   <dir>/config.txt            effective configuration
//   <dir>/<case_id>/volume.vol
//   <dir>/<case_id>/centerline.txt

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vesselfusion/config.hpp"
#include "vesselfusion/denoiser.hpp"
#include "vesselfusion/metrics.hpp"
#include "vesselfusion/voting.hpp"

namespace vf {

struct LoadedDataset {
  std::vector<DatasetCase> cases;
  DatasetSplit split;
};

/// Reads manifest and cases. The split file is required unless require_split is false,
/// in which case every case lands in the test split.
LoadedDataset load_dataset(const std::filesystem::path& dir, bool require_split = true);

/// Index list of the named split ("train", "val", "test" or "all").
std::vector<std::size_t> split_indices(const LoadedDataset& data, const std::string& name);

/// Writes the dataset. Refuses a non-empty out_dir unless force is set.
void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir, bool force);

/// Trains on the train split, selects by validation loss, writes the
/// checkpoint, <ckpt>.loss.csv and <ckpt>.config.txt. Progress lines go to log.
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& ckpt_out, std::ostream* log = nullptr);

/// Loads a checkpoint and checks every hyperparameter against cfg; throws
/// UsageError listing the differences.
DenoiserModel load_model(const RunConfig& cfg, const std::filesystem::path& ckpt);

/// Writes the aggregated centerline, <out>.report.txt, <out>.config.txt and,
/// with dump_votes, <out>.votes.txt.
VoteResult cmd_extract(const RunConfig& cfg, const std::filesystem::path& ckpt,
                       const std::filesystem::path& volume_path, const std::filesystem::path& out_path);

/// cmd_extract for every case of a split; writes <out_dir>/<case_id>.txt.
void cmd_extract_split(const RunConfig& cfg, const std::filesystem::path& ckpt,
                       const std::filesystem::path& data_dir, const std::string& split,
                       const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Matches <pred_dir>/<id>.txt (or <pred_dir>/<id>/centerline.txt) against the
/// ground truth of each selected case and writes the metrics CSV. Throws
/// FormatError listing ids without a prediction.
std::vector<CaseReport> cmd_eval(const std::filesystem::path& pred_dir,
                                 const std::filesystem::path& gt_dir,
                                 const std::vector<double>& radii, Connectivity conn,
                                 const std::string& split, const std::filesystem::path& out_csv);

struct SweepRow {
  int k = 0;
  double mean_f1_r1 = 0.0;
  double mean_betti0 = 0.0;
  double mean_betti1 = 0.0;
};

/// For each K aggregates the first K of max(K) samples per test case (seeds
/// seed, seed + 1, ...), so runs are nested. Writes <out_prefix>.csv,
/// <out_prefix>.svg and <out_prefix>.config.txt.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const std::filesystem::path& ckpt,
                                const std::filesystem::path& data_dir, const std::vector<int>& k_values,
                                const std::filesystem::path& out_prefix, std::ostream* log = nullptr);

/// Symmetric copies of a case as training variants (a single variant when augment is off).
TrainingVariants training_variants(const DatasetCase& c, const DenoiserConfig& mcfg, bool augment);

}  // namespace vf
