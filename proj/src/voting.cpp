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

#include "vesselfusion/voting.hpp"

#include <cmath>
#include <fstream>

#include "vesselfusion/parallel.hpp"

namespace vf {

int VoteGrid::count(const Voxel& v) const {
  const auto it = counts.find(v);
  return it == counts.end() ? 0 : it->second;
}

void VotingConfig::validate() const {
  if (samples < 1) throw UsageError("K must be >= 1");
  if (tau && (*tau < 1 || *tau > samples)) {
    throw UsageError("tau must be in 1..K, got " + std::to_string(*tau));
  }
}

VoteGrid vote(const std::vector<Centerline>& samples, const Dims& dims) {
  if (samples.empty()) throw UsageError("vote: need at least one sample");
  VoteGrid grid;
  grid.dims = dims;
  grid.samples = static_cast<int>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    // Centerline is a set, so each voxel votes at most once per sample.
    for (const Voxel& p : samples[k]) {
      if (!dims.contains(p)) {
        throw UsageError("vote: sample " + std::to_string(k) + " has point " + to_string(p) +
                         " outside " + to_string(dims));
      }
      ++grid.counts[p];
    }
  }
  return grid;
}

Centerline threshold_votes(const VoteGrid& grid, int tau) {
  if (tau < 1 || tau > grid.samples) {
    throw UsageError("tau " + std::to_string(tau) + " outside 1.." + std::to_string(grid.samples));
  }
  std::vector<Voxel> kept;
  for (const auto& [v, c] : grid.counts) {
    if (c >= tau) kept.push_back(v);
  }
  return Centerline(std::move(kept));
}

int auto_tau(const VoteGrid& grid, const std::vector<int>& sizes) {
  if (static_cast<int>(sizes.size()) != grid.samples) {
    throw UsageError("auto_tau: expected " + std::to_string(grid.samples) + " sample sizes");
  }
  double mean = 0.0;
  for (int s : sizes) mean += s;
  mean /= static_cast<double>(sizes.size());

  // ge[tau] = number of voxels with count >= tau.
  std::vector<long> ge(static_cast<std::size_t>(grid.samples) + 2, 0);
  for (const auto& [v, c] : grid.counts) ++ge[static_cast<std::size_t>(c)];
  for (int tau = grid.samples - 1; tau >= 1; --tau) {
    ge[static_cast<std::size_t>(tau)] += ge[static_cast<std::size_t>(tau) + 1];
  }
  int best = 1;
  double best_gap = std::abs(mean - static_cast<double>(ge[1]));
  for (int tau = 2; tau <= grid.samples; ++tau) {
    const double gap = std::abs(mean - static_cast<double>(ge[static_cast<std::size_t>(tau)]));
    if (gap < best_gap) {
      best_gap = gap;
      best = tau;
    }
  }
  return best;
}

VoteResult aggregate_samples(const std::vector<Centerline>& samples, const Dims& dims,
                             std::optional<int> tau) {
  VoteResult result;
  const VoteGrid grid = vote(samples, dims);
  for (const auto& s : samples) result.per_sample_sizes.push_back(static_cast<int>(s.size()));
  result.tau_used = tau ? *tau : auto_tau(grid, result.per_sample_sizes);
  result.aggregated = threshold_votes(grid, result.tau_used);
  return result;
}

std::vector<Centerline> draw_centerlines(const Denoiser& denoiser, const Volume& volume,
                                         int count, std::uint64_t seed_base,
                                         const SamplerConfig& sampler, const NoiseSchedule& sched,
                                         const C2FConfig& codec) {
  const Conditioning cond = denoiser.condition(volume);
  std::vector<Centerline> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), [&](std::size_t k) {
    SamplerConfig run = sampler;
    run.seed = seed_base + k;
    out[k] = decode_matrix(sample(denoiser, cond, run, sched), volume.dims(), codec);
  });
  return out;
}

VoteResult aggregate(const Denoiser& denoiser, const Volume& volume, const VotingConfig& voting,
                     const SamplerConfig& sampler, const NoiseSchedule& sched,
                     const C2FConfig& codec) {
  voting.validate();
  const auto samples =
      draw_centerlines(denoiser, volume, voting.samples, voting.seed_base, sampler, sched, codec);
  return aggregate_samples(samples, volume.dims(), voting.tau);
}

void save_vote_grid(const VoteGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (const auto& [v, c] : grid.counts) out << v.x << ' ' << v.y << ' ' << v.z << ' ' << c << '\n';
}

}  // namespace vf
