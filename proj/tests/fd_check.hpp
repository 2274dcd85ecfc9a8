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

// Central-difference check of every parameter gradient of a miniature denoiser.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vesselfusion/denoiser.hpp"
#include "vesselfusion/synth.hpp"

namespace vf::testing {

/// L = 4 rows of width d = 10 (a 4-cell grid per axis gives 2 bits per axis).
inline DenoiserConfig tiny_config(bool skip = true) {
  DenoiserConfig c;
  c.codec.grid_x = c.codec.grid_y = c.codec.grid_z = 4;
  c.codec.max_len = 4;
  c.volume_dims = {4, 4, 4};
  c.hidden = 8;
  c.heads = 2;
  c.ffn = 16;
  c.time_dim = 4;
  c.pool = 2;
  c.token_threshold = 0.3;
  c.max_tokens = 16;
  c.skip_connection = skip;
  c.init_seed = 5;
  return c;
}

/// A short vessel through a 4^3 volume and its encoding.
inline TrainingExample tiny_example(const DenoiserConfig& cfg, int shift) {
  std::vector<Voxel> pts;
  for (int i = 0; i < 3; ++i) pts.push_back({i, (shift + i) % 4, 1});
  const Centerline c(pts);
  std::vector<float> vox(cfg.volume_dims.count(), 0.0f);
  for (const Voxel& v : c) vox[cfg.volume_dims.index(v)] = 1.0f;
  const Volume vol(cfg.volume_dims, vox);
  return {encode_centerline(c, cfg.volume_dims, cfg.codec).values, make_conditioning(vol, cfg)};
}

/// Initial weights with every bias and gain also randomized so no gradient vanishes by symmetry.
inline DenoiserParams tiny_params(const DenoiserConfig& cfg, std::uint64_t seed) {
  DenoiserParams p = init_params(cfg);
  Rng rng(seed);
  for (auto& t : p.tensors()) {
    if (t.value.rows() == 1) {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += rng.uniform(-0.3, 0.3);
    }
  }
  return p;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a| + |n|, floor) over every scalar parameter.
inline GradientCheck denoiser_gradient_check(double step, std::uint64_t seed, bool skip = true) {
  const DenoiserConfig cfg = tiny_config(skip);
  const NoiseSchedule sched(20, ScheduleKind::kCosine);
  const std::vector<TrainingExample> batch{tiny_example(cfg, 0), tiny_example(cfg, 1)};
  Rng rng(seed);
  std::vector<NoiseDraw> draws = draw_noise(batch, sched, rng);
  draws[0].t = 3;
  draws[1].t = 17;
  DenoiserParams params = tiny_params(cfg, seed);
  const LossAndGrad lg = grad_at(params, cfg, batch, draws, sched);

  GradientCheck out;
  for (std::size_t k = 0; k < params.tensors().size(); ++k) {
    Mat& w = params.tensors()[k].value;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + step;
      const double up = loss_at(params, cfg, batch, draws, sched);
      w.data()[i] = keep - step;
      const double down = loss_at(params, cfg, batch, draws, sched);
      w.data()[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = lg.grads[k].data()[i];
      const double err =
          std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst_tensor = params.tensors()[k].name;
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace vf::testing
