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

#include "vesselfusion/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vesselfusion/svg_plot.hpp"
#include "vesselfusion/synth.hpp"

namespace vf {
namespace fs = std::filesystem;
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

fs::path sidecar(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

TrainingExample make_example(const DatasetCase& c, const DenoiserConfig& mcfg) {
  return {encode_centerline(c.centerline, mcfg.volume_dims, mcfg.codec).values,
          make_conditioning(c.volume, mcfg)};
}

void check_dims(const Dims& data, const DenoiserConfig& mcfg, const std::string& what) {
  if (data != mcfg.volume_dims) {
    throw UsageError(what + " has dims " + to_string(data) + " but the configuration expects " +
                     to_string(mcfg.volume_dims));
  }
}

}  // namespace

LoadedDataset load_dataset(const fs::path& dir, bool require_split) {
  const fs::path manifest = dir / "manifest.txt";
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open dataset manifest " + manifest.string());
  LoadedDataset data;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id;
    Dims dims;
    std::size_t points = 0;
    if (!(fields >> id >> dims.x >> dims.y >> dims.z >> points)) {
      throw FormatError(manifest.string() + ":" + std::to_string(line_no) +
                        ": expected 'case_id V_x V_y V_z points'");
    }
    DatasetCase c;
    c.id = id;
    c.volume = load_volume(dir / id / "volume.vol");
    c.centerline = load_centerline(dir / id / "centerline.txt");
    if (c.volume.dims() != dims) {
      throw FormatError("case " + id + ": volume dims " + to_string(c.volume.dims()) +
                        " differ from manifest " + to_string(dims));
    }
    if (!c.centerline.fits(dims)) throw FormatError("case " + id + ": centerline leaves the volume");
    by_id.emplace(id, data.cases.size());
    data.cases.push_back(std::move(c));
  }
  if (data.cases.empty()) throw FormatError("dataset " + dir.string() + " has no cases");

  const fs::path split_path = dir / "split.txt";
  if (!fs::exists(split_path)) {
    if (require_split) throw FormatError("missing split file " + split_path.string());
    for (std::size_t i = 0; i < data.cases.size(); ++i) data.split.test.push_back(i);
    return data;
  }
  std::ifstream sin(split_path);
  if (!sin) throw FormatError("cannot open split file " + split_path.string());
  line_no = 0;
  while (std::getline(sin, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id;
    std::string part;
    if (!(fields >> id >> part)) {
      throw FormatError(split_path.string() + ":" + std::to_string(line_no) + ": expected 'case_id split'");
    }
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw FormatError("split file names unknown case " + id);
    if (part == "train") {
      data.split.train.push_back(it->second);
    } else if (part == "val") {
      data.split.val.push_back(it->second);
    } else if (part == "test") {
      data.split.test.push_back(it->second);
    } else {
      throw FormatError(split_path.string() + ":" + std::to_string(line_no) + ": unknown split '" + part + "'");
    }
  }
  return data;
}

std::vector<std::size_t> split_indices(const LoadedDataset& data, const std::string& name) {
  if (name == "train") return data.split.train;
  if (name == "val") return data.split.val;
  if (name == "test") return data.split.test;
  if (name == "all") {
    std::vector<std::size_t> all(data.cases.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw UsageError("unknown split '" + name + "' (expected train, val, test or all)");
}

void cmd_synth(const RunConfig& cfg, const fs::path& out_dir, bool force) {
  const int n = cfg.synth_cases();
  if (n < 1) throw UsageError("synth_cases must be >= 1");
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
    throw UsageError("refusing to write into non-empty directory " + out_dir.string() +
                     " (pass --force to overwrite)");
  }
  const C2FConfig codec = cfg.codec();
  const std::vector<DatasetCase> cases = make_dataset(n, cfg.tree(), codec.max_len, cfg.synth_seed());
  const DatasetSplit split = split_dataset(cases, cfg.split());

  fs::create_directories(out_dir);
  std::ostringstream manifest;
  for (const auto& c : cases) {
    fs::create_directories(out_dir / c.id);
    save_volume(c.volume, out_dir / c.id / "volume.vol");
    save_centerline(c.centerline, out_dir / c.id / "centerline.txt");
    const Dims& d = c.volume.dims();
    manifest << c.id << ' ' << d.x << ' ' << d.y << ' ' << d.z << ' ' << c.centerline.size() << '\n';
  }
  write_text(out_dir / "manifest.txt", manifest.str());

  std::vector<std::string> part(cases.size());
  for (auto i : split.train) part[i] = "train";
  for (auto i : split.val) part[i] = "val";
  for (auto i : split.test) part[i] = "test";
  std::ostringstream split_text;
  for (std::size_t i = 0; i < cases.size(); ++i) split_text << cases[i].id << ' ' << part[i] << '\n';
  write_text(out_dir / "split.txt", split_text.str());
  cfg.write(out_dir / "config.txt");
}

TrainingVariants training_variants(const DatasetCase& c, const DenoiserConfig& mcfg, bool augment) {
  TrainingVariants variants;
  const int count = augment ? symmetry_count(c.volume.dims()) : 1;
  variants.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    variants.push_back(make_example(s == 0 ? c : transform_case(c, s), mcfg));
  }
  return variants;
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt_out,
                      std::ostream* log) {
  const LoadedDataset data = load_dataset(data_dir, true);
  if (data.split.train.empty()) throw FormatError("dataset has an empty train split");
  if (data.split.val.empty()) throw FormatError("dataset has an empty val split");
  const DenoiserConfig mcfg = cfg.model();
  const TrainConfig tcfg = cfg.training();
  const NoiseSchedule sched = cfg.schedule();
  const bool augment = cfg.augment();

  std::vector<TrainingVariants> train_set;
  for (auto i : data.split.train) {
    check_dims(data.cases[i].volume.dims(), mcfg, "case " + data.cases[i].id);
    train_set.push_back(training_variants(data.cases[i], mcfg, augment));
  }
  std::vector<TrainingExample> val_set;
  for (auto i : data.split.val) {
    check_dims(data.cases[i].volume.dims(), mcfg, "case " + data.cases[i].id);
    val_set.push_back(make_example(data.cases[i], mcfg));
  }

  const EpochCallback report = [&](const EpochRecord& r) {
    if (!log) return;
    char buf[128];
    if (r.val_loss) {
      std::snprintf(buf, sizeof(buf), "epoch %d train_loss %.6f val_loss %.6f\n", r.epoch, r.train_loss,
                    *r.val_loss);
    } else {
      std::snprintf(buf, sizeof(buf), "epoch %d train_loss %.6f\n", r.epoch, r.train_loss);
    }
    *log << buf << std::flush;
  };
  TrainResult result = train(mcfg, init_params(mcfg), train_set, val_set, tcfg, sched, report);

  ensure_parent(ckpt_out);
  save_checkpoint({mcfg, result.best, sched.steps(), sched.kind()}, ckpt_out);
  write_loss_csv(result.history, sidecar(ckpt_out, ".loss.csv"));
  cfg.write(sidecar(ckpt_out, ".config.txt"));
  if (log) {
    *log << "best epoch " << result.best_epoch << " val_loss " << fmt6(result.best_val_loss) << '\n';
  }
  return result;
}

DenoiserModel load_model(const RunConfig& cfg, const fs::path& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const NoiseSchedule sched = cfg.schedule();
  const auto diff = checkpoint_mismatches(ckpt, cfg.model(), sched.steps(), sched.kind());
  if (!diff.empty()) {
    throw UsageError("checkpoint " + ckpt_path.string() + " does not match the configuration: " +
                     join(diff, ", "));
  }
  return DenoiserModel(ckpt.config, std::move(ckpt.params), sched);
}

namespace {

VoteResult extract_one(const RunConfig& cfg, const DenoiserModel& model, const Volume& volume,
                       const fs::path& out_path) {
  check_dims(volume.dims(), model.config(), "volume");
  const VotingConfig voting = cfg.voting();
  voting.validate();
  const std::vector<Centerline> samples =
      draw_centerlines(model, volume, voting.samples, voting.seed_base, cfg.sampler(), model.schedule(),
                       model.config().codec);
  VoteResult result = aggregate_samples(samples, volume.dims(), voting.tau);

  ensure_parent(out_path);
  save_centerline(result.aggregated, out_path);
  std::ostringstream report;
  report << "K = " << voting.samples << '\n';
  report << "tau = " << result.tau_used << '\n';
  report << "tau_mode = " << (voting.tau ? "fixed" : "auto") << '\n';
  report << "points = " << result.aggregated.size() << '\n';
  report << "sample_sizes =";
  for (int s : result.per_sample_sizes) report << ' ' << s;
  report << '\n';
  write_text(sidecar(out_path, ".report.txt"), report.str());
  cfg.write(sidecar(out_path, ".config.txt"));
  if (cfg.dump_votes()) save_vote_grid(vote(samples, volume.dims()), sidecar(out_path, ".votes.txt"));
  return result;
}

}  // namespace

VoteResult cmd_extract(const RunConfig& cfg, const fs::path& ckpt, const fs::path& volume_path,
                       const fs::path& out_path) {
  const DenoiserModel model = load_model(cfg, ckpt);
  return extract_one(cfg, model, load_volume(volume_path), out_path);
}

void cmd_extract_split(const RunConfig& cfg, const fs::path& ckpt, const fs::path& data_dir,
                       const std::string& split, const fs::path& out_dir, std::ostream* log) {
  const DenoiserModel model = load_model(cfg, ckpt);
  const LoadedDataset data = load_dataset(data_dir, split != "all");
  fs::create_directories(out_dir);
  for (auto i : split_indices(data, split)) {
    const DatasetCase& c = data.cases[i];
    const VoteResult r = extract_one(cfg, model, c.volume, out_dir / (c.id + ".txt"));
    if (log) {
      *log << c.id << " points " << r.aggregated.size() << " tau " << r.tau_used << '\n' << std::flush;
    }
  }
}

std::vector<CaseReport> cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir,
                                 const std::vector<double>& radii, Connectivity conn,
                                 const std::string& split, const fs::path& out_csv) {
  if (radii.empty()) throw UsageError("eval needs at least one radius");
  const LoadedDataset data = load_dataset(gt_dir, split != "all");
  std::vector<std::string> missing;
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (auto i : split_indices(data, split)) {
    const std::string& id = data.cases[i].id;
    const fs::path flat = pred_dir / (id + ".txt");
    const fs::path nested = pred_dir / id / "centerline.txt";
    if (fs::is_regular_file(flat)) {
      found.emplace_back(i, flat);
    } else if (fs::is_regular_file(nested)) {
      found.emplace_back(i, nested);
    } else {
      missing.push_back(id);
    }
  }
  if (!missing.empty()) {
    throw FormatError("no prediction in " + pred_dir.string() + " for " + std::to_string(missing.size()) +
                      " case(s): " + join(missing, ", "));
  }
  std::vector<CaseReport> reports;
  for (const auto& [i, path] : found) {
    reports.push_back(evaluate_case(data.cases[i].id, load_centerline(path), data.cases[i].centerline,
                                    radii, conn));
  }
  ensure_parent(out_csv);
  write_metrics_csv(reports, out_csv);
  return reports;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const fs::path& ckpt, const fs::path& data_dir,
                                const std::vector<int>& k_values, const fs::path& out_prefix,
                                std::ostream* log) {
  if (k_values.empty()) throw UsageError("sweep needs at least one K");
  const int max_k = cfg.max_k();
  const VotingConfig voting = cfg.voting();
  for (int k : k_values) {
    if (k < 1) throw UsageError("sweep K must be >= 1, got " + std::to_string(k));
    if (k > max_k) {
      throw UsageError("sweep K = " + std::to_string(k) + " exceeds max_k = " + std::to_string(max_k));
    }
    if (voting.tau && *voting.tau > k) {
      throw UsageError("fixed tau = " + std::to_string(*voting.tau) + " exceeds sweep K = " + std::to_string(k));
    }
  }
  const int largest = *std::max_element(k_values.begin(), k_values.end());
  const DenoiserModel model = load_model(cfg, ckpt);
  const LoadedDataset data = load_dataset(data_dir, true);
  if (data.split.test.empty()) throw FormatError("dataset has an empty test split");
  const Connectivity conn = cfg.connectivity();

  std::vector<std::vector<CaseReport>> per_k(k_values.size());
  for (auto i : data.split.test) {
    const DatasetCase& c = data.cases[i];
    check_dims(c.volume.dims(), model.config(), "case " + c.id);
    const std::vector<Centerline> samples = draw_centerlines(
        model, c.volume, largest, voting.seed_base, cfg.sampler(), model.schedule(), model.config().codec);
    for (std::size_t j = 0; j < k_values.size(); ++j) {
      const std::vector<Centerline> first(samples.begin(), samples.begin() + k_values[j]);
      const VoteResult r = aggregate_samples(first, c.volume.dims(), voting.tau);
      per_k[j].push_back(evaluate_case(c.id, r.aggregated, c.centerline, {1.0}, conn));
    }
    if (log) *log << c.id << " sampled " << largest << '\n' << std::flush;
  }

  std::vector<SweepRow> rows;
  std::ostringstream csv;
  csv << "K,mean_f1_r1,mean_betti0,mean_betti1\n";
  for (std::size_t j = 0; j < k_values.size(); ++j) {
    const MeanRow m = mean_rows(per_k[j]).front();
    rows.push_back({k_values[j], m.f1, m.betti0, m.betti1});
    csv << k_values[j] << ',' << fmt6(m.f1) << ',' << fmt6(m.betti0) << ',' << fmt6(m.betti1) << '\n';
  }

  std::vector<SweepRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.k < b.k; });
  std::vector<double> xs;
  PlotSeries f1{"mean F1 (R = 1)", {}, "#1f77b4"};
  PlotSeries b0{"mean Betti-0", {}, "#d62728"};
  for (const auto& r : sorted) {
    xs.push_back(r.k);
    f1.y.push_back(r.mean_f1_r1);
    b0.y.push_back(r.mean_betti0);
  }
  ensure_parent(out_prefix);
  write_text(sidecar(out_prefix, ".csv"), csv.str());
  write_text(sidecar(out_prefix, ".svg"),
             two_axis_svg("Voting over K samples", "number of samples K", xs, f1, b0));
  cfg.write(sidecar(out_prefix, ".config.txt"));
  return rows;
}

}  // namespace vf
