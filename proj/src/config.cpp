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

#include "vesselfusion/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vf {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw UsageError("not an integer: '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

RunConfig::RunConfig() {
  entries_ = {
      // synthetic data
      {"dims_x", "32", "volume extent along x (voxels)"},
      {"dims_y", "32", "volume extent along y (voxels)"},
      {"dims_z", "32", "volume extent along z (voxels)"},
      {"synth_cases", "40", "number of synthetic cases"},
      {"synth_seed", "7", "seed of the first synthetic case"},
      {"tree_depth", "3", "maximum bifurcation depth"},
      {"branch_prob", "0.6", "probability that a segment bifurcates"},
      {"segment_min", "5", "minimum segment length (voxels)"},
      {"segment_max", "12", "maximum segment length (voxels)"},
      {"curl", "0.35", "maximum per-step heading change (radians)"},
      {"branch_angle", "0.7", "heading change at a bifurcation (radians)"},
      {"inward_bias", "0.15", "pull of the walk toward the volume centre"},
      {"tube_radius", "1.5", "vessel radius used for rasterization (voxels)"},
      {"noise_sigma", "0.1", "std of additive Gaussian intensity noise"},
      // split
      {"split_train", "0.7", "training fraction"},
      {"split_val", "0.1", "validation fraction"},
      {"split_test", "0.2", "test fraction"},
      {"split_seed", "0", "shuffle seed for the split"},
      // codec
      {"grid_x", "8", "grid cells along x (power of two)"},
      {"grid_y", "8", "grid cells along y (power of two)"},
      {"grid_z", "8", "grid cells along z (power of two)"},
      {"max_len", "64", "fixed number of rows L"},
      {"bit_low", "-1", "embedding of binary 0"},
      {"bit_high", "1", "embedding of binary 1"},
      {"lambda", "0", "bit decode threshold"},
      {"flag_threshold", "0", "validity flag decode threshold"},
      {"padding", "bit_low", "padding row value: bit_low or zero"},
      // diffusion
      {"T", "1000", "training timesteps"},
      {"T_prime", "100", "DDIM inference steps (must divide T)"},
      {"schedule_kind", "cosine", "noise schedule: cosine or linear"},
      {"seed", "0", "first sampling seed; sample k uses seed + k"},
      // model
      {"hidden", "64", "row feature width"},
      {"heads", "4", "attention heads"},
      {"ffn", "128", "feed-forward inner width"},
      {"time_dim", "32", "sinusoidal timestep embedding width (even)"},
      {"pool", "8", "pooled grid edge for the global image vector"},
      {"token_threshold", "0.8", "3x3x3 mean intensity above which a voxel becomes an image token"},
      {"max_tokens", "1024", "cap on image tokens per volume"},
      {"skip_connection", "0", "predict sqrt(g) v_t + sqrt(1-g) net(...) (1) or net(...) (0)"},
      {"init_seed", "1", "parameter initialization seed"},
      // training
      {"epochs", "200", "training epochs"},
      {"batch_size", "8", "examples per optimizer step"},
      {"learning_rate", "0.002", "AdamW learning rate"},
      {"weight_decay", "0.01", "AdamW decoupled weight decay"},
      {"train_seed", "0", "seed for batch order and noise draws"},
      {"eval_every", "1", "epochs between validation passes"},
      {"val_draws", "8", "fixed noise draws per validation case"},
      {"noise_draws", "8", "passes over the training split per epoch"},
      {"lr_schedule", "cosine", "learning rate schedule: constant or cosine"},
      {"augment", "1", "train on random grid symmetries of each case (1/0)"},
      // voting
      {"K", "10", "samples aggregated by voting"},
      {"tau", "auto", "vote threshold in 1..K, or auto"},
      {"max_k", "100", "largest K accepted by sweep"},
      {"dump_votes", "0", "write the vote grid next to extracted centerlines (1/0)"},
      // evaluation
      {"radii", "1,2,3", "matching radii (voxels)"},
      {"connectivity", "26", "voxel adjacency for Betti numbers: 6 or 26"},
      {"sweep_k", "1,5,10", "K values for sweep"},
  };
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = value;
      return;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

bool RunConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

const std::string& RunConfig::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e.value;
  }
  throw UsageError("unknown config key '" + key + "'");
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw UsageError("config key '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

void RunConfig::validate() const {
  tree().validate();
  if (synth_cases() < 1) throw UsageError("synth_cases must be >= 1");
  split().validate();
  codec().validate();
  sampler().validate();
  schedule();
  model().validate();
  training().validate();
  voting().validate();
  if (max_k() < 1) throw UsageError("max_k must be >= 1");
  for (double r : radii()) {
    if (!(r >= 0.0)) throw UsageError("radii must be >= 0");
  }
  connectivity();
  for (int k : sweep_k()) {
    if (k < 1) throw UsageError("sweep_k values must be >= 1");
  }
  dump_votes();
  augment();
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const auto& e : entries_) out << e.key << " = " << e.value << "  # " << e.help << "\n";
  return out.str();
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << echo();
}

TreeSpec RunConfig::tree() const {
  TreeSpec t;
  t.dims = {static_cast<int>(get_int("dims_x")), static_cast<int>(get_int("dims_y")),
            static_cast<int>(get_int("dims_z"))};
  t.depth = static_cast<int>(get_int("tree_depth"));
  t.branch_prob = get_double("branch_prob");
  t.segment_min = static_cast<int>(get_int("segment_min"));
  t.segment_max = static_cast<int>(get_int("segment_max"));
  t.curl = get_double("curl");
  t.branch_angle = get_double("branch_angle");
  t.inward_bias = get_double("inward_bias");
  t.tube_radius = get_double("tube_radius");
  t.noise_sigma = get_double("noise_sigma");
  return t;
}

int RunConfig::synth_cases() const { return static_cast<int>(get_int("synth_cases")); }
std::uint64_t RunConfig::synth_seed() const { return static_cast<std::uint64_t>(get_int("synth_seed")); }

SplitSpec RunConfig::split() const {
  SplitSpec s;
  s.train = get_double("split_train");
  s.val = get_double("split_val");
  s.test = get_double("split_test");
  s.seed = static_cast<std::uint64_t>(get_int("split_seed"));
  return s;
}

C2FConfig RunConfig::codec() const {
  C2FConfig c;
  c.grid_x = static_cast<int>(get_int("grid_x"));
  c.grid_y = static_cast<int>(get_int("grid_y"));
  c.grid_z = static_cast<int>(get_int("grid_z"));
  c.max_len = static_cast<int>(get_int("max_len"));
  c.bit_low = get_double("bit_low");
  c.bit_high = get_double("bit_high");
  c.lambda = get_double("lambda");
  c.flag_threshold = get_double("flag_threshold");
  const std::string& pad = get("padding");
  if (pad == "bit_low") {
    c.padding = PaddingMode::kBitLow;
  } else if (pad == "zero") {
    c.padding = PaddingMode::kZero;
  } else {
    throw UsageError("padding must be bit_low or zero, got '" + pad + "'");
  }
  return c;
}

NoiseSchedule RunConfig::schedule() const {
  return NoiseSchedule(static_cast<int>(get_int("T")), parse_schedule_kind(get("schedule_kind")));
}

SamplerConfig RunConfig::sampler() const {
  SamplerConfig s;
  s.steps = static_cast<int>(get_int("T"));
  s.inference_steps = static_cast<int>(get_int("T_prime"));
  s.seed = static_cast<std::uint64_t>(get_int("seed"));
  return s;
}

DenoiserConfig RunConfig::model() const {
  DenoiserConfig m;
  m.codec = codec();
  m.volume_dims = tree().dims;
  m.hidden = static_cast<int>(get_int("hidden"));
  m.heads = static_cast<int>(get_int("heads"));
  m.ffn = static_cast<int>(get_int("ffn"));
  m.time_dim = static_cast<int>(get_int("time_dim"));
  m.pool = static_cast<int>(get_int("pool"));
  m.token_threshold = get_double("token_threshold");
  m.max_tokens = static_cast<int>(get_int("max_tokens"));
  m.skip_connection = get_int("skip_connection") != 0;
  m.init_seed = static_cast<std::uint64_t>(get_int("init_seed"));
  return m;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.epochs = static_cast<int>(get_int("epochs"));
  t.batch_size = static_cast<int>(get_int("batch_size"));
  t.learning_rate = get_double("learning_rate");
  t.weight_decay = get_double("weight_decay");
  t.seed = static_cast<std::uint64_t>(get_int("train_seed"));
  t.eval_every = static_cast<int>(get_int("eval_every"));
  t.val_draws = static_cast<int>(get_int("val_draws"));
  t.noise_draws = static_cast<int>(get_int("noise_draws"));
  const std::string& sched = get("lr_schedule");
  if (sched == "cosine") {
    t.cosine_decay = true;
  } else if (sched != "constant") {
    throw UsageError("lr_schedule must be constant or cosine, got '" + sched + "'");
  }
  return t;
}

VotingConfig RunConfig::voting() const {
  VotingConfig v;
  v.samples = static_cast<int>(get_int("K"));
  if (get("tau") != "auto") v.tau = static_cast<int>(get_int("tau"));
  v.seed_base = static_cast<std::uint64_t>(get_int("seed"));
  return v;
}

int RunConfig::max_k() const { return static_cast<int>(get_int("max_k")); }

std::vector<double> RunConfig::radii() const { return parse_double_list(get("radii")); }

Connectivity RunConfig::connectivity() const {
  const long long c = get_int("connectivity");
  if (c == 6) return Connectivity::k6;
  if (c == 26) return Connectivity::k26;
  throw UsageError("connectivity must be 6 or 26");
}

std::vector<int> RunConfig::sweep_k() const { return parse_int_list(get("sweep_k")); }

bool RunConfig::augment() const {
  const long long v = get_int("augment");
  if (v != 0 && v != 1) throw UsageError("augment must be 0 or 1");
  return v == 1;
}

bool RunConfig::dump_votes() const {
  const long long v = get_int("dump_votes");
  if (v != 0 && v != 1) throw UsageError("dump_votes must be 0 or 1");
  return v == 1;
}

}  // namespace vf
