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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vesselfusion/c2f_codec.hpp"
#include "vesselfusion/common.hpp"
#include "vesselfusion/diffusion.hpp"
#include "vesselfusion/volume_io.hpp"

namespace vf {

/// Architecture hyperparameters of the set denoiser.
///
/// Per call the network sees the noisy L x d matrix, the image and t:
///   rows      = v_t W_in + (pooled image W_cond) + (sinusoid(t) W_time)
///   rows     += SelfAttention(LN(rows))               (across the L rows)
///   rows     += CrossAttention(LN(rows), image tokens)
///   rows     += FFN(LN(rows))
///   out       = rows W_out
/// With skip_connection the prediction is sqrt(g) v_t + sqrt(1 - g) out,
/// g = gamma(t), which is still an estimate of v0.
///
/// Image tokens are the voxels whose 3x3x3 mean exceeds token_threshold,
/// described by intensity, neighbourhood mean, normalized position, squared
/// radius and their own C2F code.
struct DenoiserConfig {
  C2FConfig codec;
  Dims volume_dims{32, 32, 32};
  int hidden = 64;
  int heads = 4;
  int ffn = 128;
  int time_dim = 32;
  int pool = 8;
  double token_threshold = 0.5;
  int max_tokens = 1024;
  bool skip_connection = true;
  std::uint64_t init_seed = 1;

  void validate() const;
  int rows() const { return codec.max_len; }
  int width() const { return codec.width(); }
  int token_features() const { return 6 + codec.total_bits() + 3; }
  int pooled_size() const { return pool * pool * pool; }
};

struct NamedTensor {
  std::string name;
  Mat value;
};

/// Flat named parameter arrays in a fixed architecture order.
class DenoiserParams {
 public:
  DenoiserParams() = default;
  explicit DenoiserParams(std::vector<NamedTensor> tensors);

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t index(std::string_view name) const;
  Mat& operator[](std::string_view name) { return tensors_[index(name)].value; }
  const Mat& operator[](std::string_view name) const { return tensors_[index(name)].value; }
  std::size_t count() const;
  bool all_finite() const;

  bool operator==(const DenoiserParams& other) const;

 private:
  std::vector<NamedTensor> tensors_;
};

/// Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit norm gains.
DenoiserParams init_params(const DenoiserConfig& cfg);
/// Every tensor zero, norm gains included.
DenoiserParams zero_params(const DenoiserConfig& cfg);

/// Average-pools the image to pool^3 cells, x fastest.
Eigen::RowVectorXd pool_volume(const Volume& volume, int pool);
Mat volume_tokens(const Volume& volume, const DenoiserConfig& cfg);

/// Global conditioning vector pooled(volume) W_cond + b_cond.
Eigen::RowVectorXd encode_volume(const DenoiserParams& params, const DenoiserConfig& cfg,
                                 const Volume& volume);

/// [sin(t w_k) for k < dim/2, cos(t w_k) for k < dim/2], w_k = 10000^(-k/(dim/2)).
/// dim must be even.
Eigen::RowVectorXd embed_timestep(int t, int dim);

Conditioning make_conditioning(const Volume& volume, const DenoiserConfig& cfg);

/// v_theta(v_t, I, t). Throws UsageError on non-finite input or wrong shape.
Mat denoise(const DenoiserParams& params, const DenoiserConfig& cfg, const Mat& v_t,
            const Conditioning& cond, int t, const NoiseSchedule& sched);

class DenoiserModel : public Denoiser {
 public:
  DenoiserModel(DenoiserConfig cfg, DenoiserParams params, NoiseSchedule sched);

  Conditioning condition(const Volume& volume) const override;
  Mat predict_clean(const Mat& v_t, const Conditioning& cond, int t) const override;
  int rows() const override { return cfg_.rows(); }
  int width() const override { return cfg_.width(); }

  const DenoiserConfig& config() const { return cfg_; }
  const DenoiserParams& params() const { return params_; }
  const NoiseSchedule& schedule() const { return sched_; }

 private:
  DenoiserConfig cfg_;
  DenoiserParams params_;
  NoiseSchedule sched_;
};

struct TrainingExample {
  Mat v0;
  Conditioning cond;
};

/// Noise realization for one example: timestep and Gaussian matrix.
struct NoiseDraw {
  int t = 1;
  Mat eps;
};

/// t ~ U{1..T}, eps ~ N(0, 1), drawn in batch order.
std::vector<NoiseDraw> draw_noise(std::span<const TrainingExample> batch,
                                  const NoiseSchedule& sched, Rng& rng);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Mat> grads;  // one per parameter tensor
};

/// Mean over the batch of the per-example mean squared error to v0.
double loss(const DenoiserParams& params, const DenoiserConfig& cfg,
            std::span<const TrainingExample> batch, const NoiseSchedule& sched, Rng& rng);
double loss_at(const DenoiserParams& params, const DenoiserConfig& cfg,
               std::span<const TrainingExample> batch, std::span<const NoiseDraw> draws,
               const NoiseSchedule& sched);

LossAndGrad grad(const DenoiserParams& params, const DenoiserConfig& cfg,
                 std::span<const TrainingExample> batch, const NoiseSchedule& sched, Rng& rng);
LossAndGrad grad_at(const DenoiserParams& params, const DenoiserConfig& cfg,
                    std::span<const TrainingExample> batch, std::span<const NoiseDraw> draws,
                    const NoiseSchedule& sched);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int eval_every = 1;
  /// Fixed noise draws per validation case, identical across epochs.
  int val_draws = 8;
  /// Passes over the training split per epoch, each with fresh noise.
  int noise_draws = 1;
  /// Cosine decay of the learning rate to zero over all optimizer steps.
  bool cosine_decay = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  DenoiserParams best;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Equivalent views of one training case (for example symmetric copies).
/// Every visit during training uses one of them, drawn uniformly.
using TrainingVariants = std::vector<TrainingExample>;

/// AdamW (decoupled weight decay) over shuffled mini-batches. Returns the
/// snapshot with the lowest validation loss. Throws DivergenceError on a
/// non-finite loss or parameter.
TrainResult train(const DenoiserConfig& cfg, DenoiserParams params,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                  const NoiseSchedule& sched, const EpochCallback& on_epoch = {});
TrainResult train(const DenoiserConfig& cfg, DenoiserParams params,
                  std::span<const TrainingVariants> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                  const NoiseSchedule& sched, const EpochCallback& on_epoch = {});

/// Mean loss over the fixed validation draws.
double validation_loss(const DenoiserParams& params, const DenoiserConfig& cfg,
                       std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                       const NoiseSchedule& sched);

// Checkpoint: text header with hyperparameters and tensor table, "end\n",
// then each tensor as raw little-endian float64, row-major, in table order.
struct Checkpoint {
  DenoiserConfig config;
  DenoiserParams params;
  int steps = 1000;
  ScheduleKind schedule = ScheduleKind::kCosine;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Names of hyperparameters that differ; empty when compatible.
std::vector<std::string> checkpoint_mismatches(const Checkpoint& ckpt, const DenoiserConfig& cfg,
                                               int steps, ScheduleKind kind);

void write_loss_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace vf
