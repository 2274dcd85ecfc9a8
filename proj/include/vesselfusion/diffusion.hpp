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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vesselfusion/common.hpp"
#include "vesselfusion/volume_io.hpp"

namespace vf {

enum class ScheduleKind { kCosine, kLinear };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Tabulated signal fraction gamma(0..T) with gamma(0) = 1, gamma(T) = 0,
/// strictly decreasing.
class NoiseSchedule {
 public:
  /// cosine: gamma(t) = cos^2(pi t / 2T); linear: gamma(t) = 1 - t/T.
  NoiseSchedule(int steps, ScheduleKind kind);

  int steps() const { return steps_; }
  ScheduleKind kind() const { return kind_; }
  double gamma(int t) const;
  const std::vector<double>& table() const { return gamma_; }

 private:
  int steps_;
  ScheduleKind kind_;
  std::vector<double> gamma_;
};

NoiseSchedule make_schedule(int steps, ScheduleKind kind);

/// v_t = sqrt(gamma(t)) v0 + sqrt(1 - gamma(t)) eps.
Mat forward_noise(const Mat& v0, int t, const Mat& eps, const NoiseSchedule& sched);

/// eps_hat = (v_t - sqrt(gamma(t)) v0_hat) / sqrt(1 - gamma(t)). Requires t >= 1.
Mat predict_eps(const Mat& v_t, const Mat& v0_hat, int t, const NoiseSchedule& sched);

/// One deterministic DDIM update from t to t - dt.
Mat ddim_step(const Mat& v_t, const Mat& v0_hat, int t, int dt, const NoiseSchedule& sched);

/// Per-image features handed to a denoiser on every step. Implementations
/// decide what goes in; oracle denoisers leave both members empty.
struct Conditioning {
  Eigen::RowVectorXd pooled;
  Mat tokens;
};

/// x0-predicting conditional set denoiser. predict_clean must be safe to call
/// concurrently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Conditioning condition(const Volume& volume) const;
  virtual Mat predict_clean(const Mat& v_t, const Conditioning& cond, int t) const = 0;
  virtual int rows() const = 0;
  virtual int width() const = 0;
};

struct SamplerConfig {
  int steps = 1000;       // T
  int inference_steps = 100;  // T'
  std::uint64_t seed = 0;

  void validate() const;
  int stride() const { return steps / inference_steps; }
};

/// Draws v_T ~ N(0, 1) from cfg.seed and applies T' DDIM steps.
Mat sample(const Denoiser& denoiser, const Volume& volume, const SamplerConfig& cfg,
           const NoiseSchedule& sched);

/// Same as above with a precomputed conditioning.
Mat sample(const Denoiser& denoiser, const Conditioning& cond, const SamplerConfig& cfg,
           const NoiseSchedule& sched);

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

}  // namespace vf
