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

#include <filesystem>
#include <string>
#include <vector>

#include "vesselfusion/c2f_codec.hpp"
#include "vesselfusion/denoiser.hpp"
#include "vesselfusion/diffusion.hpp"
#include "vesselfusion/metrics.hpp"
#include "vesselfusion/synth.hpp"
#include "vesselfusion/voting.hpp"

namespace vf {

/// Every pipeline setting as a flat key=value table with documented defaults.
/// File syntax: one "key = value" per line, '#' starts a comment.
class RunConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::string help;
  };

  RunConfig();

  /// Defaults overridden by the file. Unknown keys and invalid values throw UsageError.
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  const std::vector<Entry>& entries() const { return entries_; }

  /// Checks every typed view; throws UsageError on the first violation.
  void validate() const;

  /// Effective config in the file syntax, including help comments.
  std::string echo() const;
  void write(const std::filesystem::path& path) const;

  TreeSpec tree() const;
  int synth_cases() const;
  std::uint64_t synth_seed() const;
  SplitSpec split() const;
  C2FConfig codec() const;
  NoiseSchedule schedule() const;
  SamplerConfig sampler() const;
  DenoiserConfig model() const;
  TrainConfig training() const;
  VotingConfig voting() const;
  int max_k() const;
  std::vector<double> radii() const;
  Connectivity connectivity() const;
  std::vector<int> sweep_k() const;
  bool dump_votes() const;
  bool augment() const;

 private:
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;

  std::vector<Entry> entries_;
};

std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace vf
