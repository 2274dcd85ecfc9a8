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
#include <map>
#include <optional>
#include <vector>

#include "vesselfusion/c2f_codec.hpp"
#include "vesselfusion/diffusion.hpp"
#include "vesselfusion/volume_io.hpp"

namespace vf {

/// Sparse per-voxel vote counts over the discrete space of a volume.
/// Only voxels with at least one vote are stored.
struct VoteGrid {
  Dims dims;
  int samples = 0;  // K
  std::map<Voxel, int> counts;

  int count(const Voxel& v) const;
};

struct VotingConfig {
  int samples = 10;          // K
  std::optional<int> tau;    // fixed threshold; auto when empty
  std::uint64_t seed_base = 0;

  void validate() const;
};

struct VoteResult {
  Centerline aggregated;
  int tau_used = 1;
  std::vector<int> per_sample_sizes;
};

/// Each sample contributes one vote per distinct voxel it contains.
/// Throws UsageError naming the sample if a point lies outside dims.
VoteGrid vote(const std::vector<Centerline>& samples, const Dims& dims);

/// Voxels with count >= tau. Requires 1 <= tau <= K.
Centerline threshold_votes(const VoteGrid& grid, int tau);

/// Argmin over tau in 1..K of |mean(sizes) - |threshold_votes(grid, tau)||,
/// ties to the smallest tau.
int auto_tau(const VoteGrid& grid, const std::vector<int>& sizes);

/// Votes over already decoded samples and thresholds with a fixed or automatic tau.
VoteResult aggregate_samples(const std::vector<Centerline>& samples, const Dims& dims,
                             std::optional<int> tau);

/// Runs sample() with seeds seed_base .. seed_base + count - 1 and decodes each.
std::vector<Centerline> draw_centerlines(const Denoiser& denoiser, const Volume& volume,
                                         int count, std::uint64_t seed_base,
                                         const SamplerConfig& sampler, const NoiseSchedule& sched,
                                         const C2FConfig& codec);

/// Full pipeline: K samples, decode, vote, threshold.
VoteResult aggregate(const Denoiser& denoiser, const Volume& volume, const VotingConfig& voting,
                     const SamplerConfig& sampler, const NoiseSchedule& sched,
                     const C2FConfig& codec);

/// Writes "x y z count" lines in voxel order.
void save_vote_grid(const VoteGrid& grid, const std::filesystem::path& path);

}  // namespace vf
