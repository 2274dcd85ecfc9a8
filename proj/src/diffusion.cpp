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

#include "vesselfusion/diffusion.hpp"

#include <cmath>
#include <numbers>

namespace vf {
namespace {

void check_t(int t, const NoiseSchedule& sched) {
  if (t < 0 || t > sched.steps()) {
    throw UsageError("timestep " + std::to_string(t) + " outside 0.." +
                     std::to_string(sched.steps()));
  }
}

void check_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  if (name == "linear") return ScheduleKind::kLinear;
  throw UsageError("unknown schedule kind '" + name + "' (expected cosine or linear)");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kCosine ? "cosine" : "linear";
}

NoiseSchedule::NoiseSchedule(int steps, ScheduleKind kind) : steps_(steps), kind_(kind) {
  if (steps < 1) throw UsageError("schedule needs T >= 1, got " + std::to_string(steps));
  gamma_.resize(static_cast<std::size_t>(steps) + 1);
  for (int t = 0; t <= steps; ++t) {
    const double frac = static_cast<double>(t) / steps;
    double g;
    if (kind == ScheduleKind::kCosine) {
      const double c = std::cos(0.5 * std::numbers::pi * frac);
      g = c * c;
    } else {
      g = 1.0 - frac;
    }
    gamma_[static_cast<std::size_t>(t)] = g;
  }
  // Endpoints are exact by definition, not up to cos(pi/2) rounding.
  gamma_.front() = 1.0;
  gamma_.back() = 0.0;
}

double NoiseSchedule::gamma(int t) const {
  check_t(t, *this);
  return gamma_[static_cast<std::size_t>(t)];
}

NoiseSchedule make_schedule(int steps, ScheduleKind kind) { return NoiseSchedule(steps, kind); }

Mat forward_noise(const Mat& v0, int t, const Mat& eps, const NoiseSchedule& sched) {
  check_shape(v0, eps, "forward_noise");
  const double g = sched.gamma(t);
  if (g == 1.0) return v0;
  if (g == 0.0) return eps;
  return std::sqrt(g) * v0 + std::sqrt(1.0 - g) * eps;
}

Mat predict_eps(const Mat& v_t, const Mat& v0_hat, int t, const NoiseSchedule& sched) {
  check_shape(v_t, v0_hat, "predict_eps");
  if (t < 1) throw UsageError("predict_eps requires t >= 1");
  const double g = sched.gamma(t);
  return (v_t - std::sqrt(g) * v0_hat) / std::sqrt(1.0 - g);
}

Mat ddim_step(const Mat& v_t, const Mat& v0_hat, int t, int dt, const NoiseSchedule& sched) {
  if (dt < 1 || t - dt < 0) {
    throw UsageError("ddim_step: cannot step from t=" + std::to_string(t) + " by " +
                     std::to_string(dt));
  }
  check_t(t, sched);
  const int next = t - dt;
  const double g_next = sched.gamma(next);
  if (g_next == 1.0) return v0_hat;
  const Mat eps_hat = predict_eps(v_t, v0_hat, t, sched);
  return std::sqrt(g_next) * v0_hat + std::sqrt(1.0 - g_next) * eps_hat;
}

Conditioning Denoiser::condition(const Volume&) const { return {}; }

void SamplerConfig::validate() const {
  if (steps < 1) throw UsageError("T must be >= 1");
  if (inference_steps < 1 || inference_steps > steps) {
    throw UsageError("T_prime must be in 1..T");
  }
  if (steps % inference_steps != 0) {
    throw UsageError("T (" + std::to_string(steps) + ") must be divisible by T_prime (" +
                     std::to_string(inference_steps) + ")");
  }
}

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Mat sample(const Denoiser& denoiser, const Volume& volume, const SamplerConfig& cfg,
           const NoiseSchedule& sched) {
  return sample(denoiser, denoiser.condition(volume), cfg, sched);
}

Mat sample(const Denoiser& denoiser, const Conditioning& cond, const SamplerConfig& cfg,
           const NoiseSchedule& sched) {
  cfg.validate();
  if (cfg.steps != sched.steps()) {
    throw UsageError("sampler T does not match schedule T");
  }
  Rng rng(cfg.seed);
  Mat v = gaussian_matrix(denoiser.rows(), denoiser.width(), rng);
  const int dt = cfg.stride();
  for (int t = cfg.steps; t > 0; t -= dt) {
    const Mat v0_hat = denoiser.predict_clean(v, cond, t);
    v = ddim_step(v, v0_hat, t, dt, sched);
  }
  return v;
}

}  // namespace vf
