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

#include "vesselfusion/denoiser.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <tuple>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vesselfusion/autodiff.hpp"
#include "vesselfusion/parallel.hpp"

namespace vf {
namespace {

struct TensorSpec {
  const char* name;
  int rows;
  int cols;
  enum Kind { kWeight, kBias, kGain } kind;
};

std::vector<TensorSpec> layout(const DenoiserConfig& c) {
  const int h = c.hidden;
  const int d = c.width();
  const int f = c.token_features();
  using K = TensorSpec::Kind;
  return {
      {"in.w", d, h, K::kWeight},          {"in.b", 1, h, K::kBias},
      {"cond.w", c.pooled_size(), h, K::kWeight}, {"cond.b", 1, h, K::kBias},
      {"time.w", c.time_dim, h, K::kWeight}, {"time.b", 1, h, K::kBias},
      {"sa.ln.g", 1, h, K::kGain},         {"sa.ln.b", 1, h, K::kBias},
      {"sa.q", h, h, K::kWeight},          {"sa.k", h, h, K::kWeight},
      {"sa.v", h, h, K::kWeight},          {"sa.o", h, h, K::kWeight},
      {"sa.o.b", 1, h, K::kBias},
      {"ca.ln.g", 1, h, K::kGain},         {"ca.ln.b", 1, h, K::kBias},
      {"ca.q", h, h, K::kWeight},          {"ca.k", f, h, K::kWeight},
      {"ca.k.b", 1, h, K::kBias},          {"ca.v", f, h, K::kWeight},
      {"ca.v.b", 1, h, K::kBias},          {"ca.o", h, h, K::kWeight},
      {"ca.o.b", 1, h, K::kBias},
      {"ff.ln.g", 1, h, K::kGain},         {"ff.ln.b", 1, h, K::kBias},
      {"ff.w1", h, c.ffn, K::kWeight},     {"ff.b1", 1, c.ffn, K::kBias},
      {"ff.w2", c.ffn, h, K::kWeight},     {"ff.b2", 1, h, K::kBias},
      {"out.w", h, d, K::kWeight},         {"out.b", 1, d, K::kBias},
  };
}

Mat row_matrix(const Eigen::RowVectorXd& v) {
  Mat m(1, v.size());
  m.row(0) = v;
  return m;
}

ad::Var attention(ad::Tape& tape, ad::Var q, ad::Var k, ad::Var v, int heads) {
  const int width = static_cast<int>(tape.value(q).cols());
  const int head_dim = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<ad::Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int hd = 0; hd < heads; ++hd) {
    const int at = hd * head_dim;
    ad::Var qh = tape.slice_cols(q, at, head_dim);
    ad::Var kh = tape.slice_cols(k, at, head_dim);
    ad::Var vh = tape.slice_cols(v, at, head_dim);
    ad::Var weights = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), scale));
    outs.push_back(tape.matmul(weights, vh));
  }
  return heads == 1 ? outs.front() : tape.concat_cols(outs);
}

/// Builds the forward graph; params holds one tape node per tensor.
ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& params, const DenoiserParams& names,
                const DenoiserConfig& cfg, const Mat& v_t, const Conditioning& cond, int t,
                const NoiseSchedule& sched) {
  const auto p = [&](std::string_view n) { return params[names.index(n)]; };
  const auto affine = [&](ad::Var x, std::string_view w, std::string_view b) {
    return tape.add_row(tape.matmul(x, p(w)), p(b));
  };

  ad::Var h = affine(tape.constant(v_t), "in.w", "in.b");
  ad::Var global = affine(tape.constant(row_matrix(cond.pooled)), "cond.w", "cond.b");
  ad::Var time = affine(tape.constant(row_matrix(embed_timestep(t, cfg.time_dim))), "time.w",
                        "time.b");
  h = tape.add_row(h, tape.add(global, time));

  ad::Var a = tape.layer_norm(h, p("sa.ln.g"), p("sa.ln.b"));
  ad::Var mixed = attention(tape, tape.matmul(a, p("sa.q")), tape.matmul(a, p("sa.k")),
                            tape.matmul(a, p("sa.v")), cfg.heads);
  h = tape.add(h, affine(mixed, "sa.o", "sa.o.b"));

  if (cond.tokens.rows() > 0) {
    a = tape.layer_norm(h, p("ca.ln.g"), p("ca.ln.b"));
    ad::Var tokens = tape.constant(cond.tokens);
    ad::Var read = attention(tape, tape.matmul(a, p("ca.q")), affine(tokens, "ca.k", "ca.k.b"),
                             affine(tokens, "ca.v", "ca.v.b"), cfg.heads);
    h = tape.add(h, affine(read, "ca.o", "ca.o.b"));
  }

  a = tape.layer_norm(h, p("ff.ln.g"), p("ff.ln.b"));
  h = tape.add(h, affine(tape.silu(affine(a, "ff.w1", "ff.b1")), "ff.w2", "ff.b2"));

  ad::Var out = affine(h, "out.w", "out.b");
  if (cfg.skip_connection) {
    const double g = sched.gamma(t);
    out = tape.affine_mix(out, std::sqrt(1.0 - g), v_t, std::sqrt(g));
  }
  return out;
}

void check_input(const DenoiserConfig& cfg, const Mat& v_t, const Conditioning& cond) {
  if (v_t.rows() != cfg.rows() || v_t.cols() != cfg.width()) {
    throw UsageError("denoise: expected " + std::to_string(cfg.rows()) + "x" +
                     std::to_string(cfg.width()) + " input, got " + std::to_string(v_t.rows()) +
                     "x" + std::to_string(v_t.cols()));
  }
  if (!v_t.allFinite()) throw UsageError("denoise: non-finite input matrix");
  if (cond.pooled.size() != cfg.pooled_size()) {
    throw UsageError("denoise: conditioning vector has wrong length");
  }
  if (cond.tokens.rows() > 0 && cond.tokens.cols() != cfg.token_features()) {
    throw UsageError("denoise: token feature width mismatch");
  }
}

struct Evaluation {
  double loss;
  std::vector<Mat> grads;
};

Evaluation evaluate_example(const DenoiserParams& params, const DenoiserConfig& cfg,
                            const TrainingExample& ex, const NoiseDraw& draw,
                            const NoiseSchedule& sched, bool want_grad) {
  const Mat v_t = forward_noise(ex.v0, draw.t, draw.eps, sched);
  check_input(cfg, v_t, ex.cond);
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors().size());
  for (const auto& t : params.tensors()) {
    vars.push_back(want_grad ? tape.parameter(t.value) : tape.constant(t.value));
  }
  ad::Var pred = forward(tape, vars, params, cfg, v_t, ex.cond, draw.t, sched);
  ad::Var l = tape.mse(pred, ex.v0);
  Evaluation out{tape.value(l)(0, 0), {}};
  if (want_grad) {
    tape.backward(l);
    out.grads.reserve(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Mat& g = tape.grad(vars[i]);
      const Mat& v = params.tensors()[i].value;
      out.grads.push_back(g.size() == 0 ? Mat::Zero(v.rows(), v.cols()) : g);
    }
  }
  return out;
}

Evaluation evaluate_batch(const DenoiserParams& params, const DenoiserConfig& cfg,
                          std::span<const TrainingExample> batch, std::span<const NoiseDraw> draws,
                          const NoiseSchedule& sched, bool want_grad) {
  if (batch.empty()) throw UsageError("loss: empty batch");
  if (draws.size() != batch.size()) throw UsageError("loss: one noise draw per example required");
  std::vector<Evaluation> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    parts[i] = evaluate_example(params, cfg, batch[i], draws[i], sched, want_grad);
  });
  const double n = static_cast<double>(batch.size());
  Evaluation total{0.0, {}};
  for (const auto& e : parts) total.loss += e.loss;
  total.loss /= n;
  if (want_grad) {
    total.grads = std::move(parts.front().grads);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      for (std::size_t k = 0; k < total.grads.size(); ++k) total.grads[k] += parts[i].grads[k];
    }
    for (auto& g : total.grads) g /= n;
  }
  return total;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void DenoiserConfig::validate() const {
  codec.validate();
  if (!volume_dims.valid()) throw UsageError("model volume dims must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    throw UsageError("hidden must be a positive multiple of heads");
  }
  if (ffn < 1) throw UsageError("ffn width must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) throw UsageError("time_dim must be even and >= 2");
  if (pool < 1) throw UsageError("pool must be >= 1");
  if (max_tokens < 1) throw UsageError("max_tokens must be >= 1");
}

DenoiserParams::DenoiserParams(std::vector<NamedTensor> tensors) : tensors_(std::move(tensors)) {}

std::size_t DenoiserParams::index(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  throw UsageError("unknown parameter tensor '" + std::string(name) + "'");
}

std::size_t DenoiserParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool DenoiserParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(),
                     [](const NamedTensor& t) { return t.value.allFinite(); });
}

bool DenoiserParams::operator==(const DenoiserParams& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols() ||
        a.value != b.value) {
      return false;
    }
  }
  return true;
}

DenoiserParams init_params(const DenoiserConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.init_seed, 0x1417));
  std::vector<NamedTensor> tensors;
  for (const auto& spec : layout(cfg)) {
    Mat m(spec.rows, spec.cols);
    switch (spec.kind) {
      case TensorSpec::kWeight: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.rows));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
        break;
      }
      case TensorSpec::kBias:
        m.setZero();
        break;
      case TensorSpec::kGain:
        m.setOnes();
        break;
    }
    tensors.push_back({spec.name, std::move(m)});
  }
  return DenoiserParams(std::move(tensors));
}

DenoiserParams zero_params(const DenoiserConfig& cfg) {
  cfg.validate();
  std::vector<NamedTensor> tensors;
  for (const auto& spec : layout(cfg)) tensors.push_back({spec.name, Mat::Zero(spec.rows, spec.cols)});
  return DenoiserParams(std::move(tensors));
}

Eigen::RowVectorXd pool_volume(const Volume& volume, int pool) {
  const Dims& d = volume.dims();
  const std::size_t cells = static_cast<std::size_t>(pool) * pool * pool;
  std::vector<double> sum(cells, 0.0);
  std::vector<int> count(cells, 0);
  for (int z = 0; z < d.z; ++z) {
    const int cz = z * pool / d.z;
    for (int y = 0; y < d.y; ++y) {
      const int cy = y * pool / d.y;
      for (int x = 0; x < d.x; ++x) {
        const int cx = x * pool / d.x;
        const auto c = static_cast<std::size_t>(cx + pool * (cy + pool * cz));
        sum[c] += volume.at(x, y, z);
        ++count[c];
      }
    }
  }
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(cells));
  for (std::size_t c = 0; c < cells; ++c) {
    out(static_cast<Eigen::Index>(c)) = count[c] > 0 ? sum[c] / count[c] : 0.0;
  }
  return out;
}

Mat volume_tokens(const Volume& volume, const DenoiserConfig& cfg) {
  const Dims& d = volume.dims();
  if (d != cfg.volume_dims) {
    throw UsageError("volume dims " + to_string(d) + " do not match model input " +
                     to_string(cfg.volume_dims));
  }
  struct Candidate {
    Voxel v;
    double intensity;
    double local_mean;
  };
  std::vector<Candidate> picked;
  for (int z = 0; z < d.z; ++z) {
    for (int y = 0; y < d.y; ++y) {
      for (int x = 0; x < d.x; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const Voxel q{x + dx, y + dy, z + dz};
              if (!d.contains(q)) continue;
              sum += volume.at(q);
              ++n;
            }
          }
        }
        const double mean = sum / n;
        if (mean > cfg.token_threshold) picked.push_back({{x, y, z}, volume.at(x, y, z), mean});
      }
    }
  }
  if (picked.size() > static_cast<std::size_t>(cfg.max_tokens)) {
    std::stable_sort(picked.begin(), picked.end(), [](const Candidate& a, const Candidate& b) {
      return a.local_mean > b.local_mean;
    });
    picked.resize(static_cast<std::size_t>(cfg.max_tokens));
    std::stable_sort(picked.begin(), picked.end(), [&](const Candidate& a, const Candidate& b) {
      return d.index(a.v) < d.index(b.v);
    });
  }
  Mat tokens(static_cast<Eigen::Index>(picked.size()), cfg.token_features());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Candidate& c = picked[i];
    tokens(r, 0) = c.intensity;
    tokens(r, 1) = c.local_mean;
    double r2 = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      const double n = 2.0 * (axis_of(c.v, axis) + 0.5) / d.axis(axis) - 1.0;
      tokens(r, 2 + axis) = n;
      r2 += n * n;
    }
    tokens(r, 5) = r2;
    const C2FElement e = encode_point(c.v, d, cfg.codec);
    for (std::size_t k = 0; k < e.bits.size(); ++k) tokens(r, 6 + static_cast<Eigen::Index>(k)) = e.bits[k];
    for (int axis = 0; axis < 3; ++axis) {
      tokens(r, 6 + cfg.codec.total_bits() + axis) = e.offsets[static_cast<std::size_t>(axis)];
    }
  }
  return tokens;
}

Eigen::RowVectorXd encode_volume(const DenoiserParams& params, const DenoiserConfig& cfg,
                                 const Volume& volume) {
  if (volume.dims() != cfg.volume_dims) {
    throw UsageError("volume dims " + to_string(volume.dims()) + " do not match model input " +
                     to_string(cfg.volume_dims));
  }
  const Eigen::RowVectorXd pooled = pool_volume(volume, cfg.pool);
  return pooled * params["cond.w"] + params["cond.b"].row(0);
}

Eigen::RowVectorXd embed_timestep(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw UsageError("timestep embedding dim must be even and >= 2");
  const int half = dim / 2;
  Eigen::RowVectorXd e(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -static_cast<double>(k) / half);
    e(k) = std::sin(t * freq);
    e(half + k) = std::cos(t * freq);
  }
  return e;
}

Conditioning make_conditioning(const Volume& volume, const DenoiserConfig& cfg) {
  if (volume.dims() != cfg.volume_dims) {
    throw UsageError("volume dims " + to_string(volume.dims()) + " do not match model input " +
                     to_string(cfg.volume_dims));
  }
  return {pool_volume(volume, cfg.pool), volume_tokens(volume, cfg)};
}

Mat denoise(const DenoiserParams& params, const DenoiserConfig& cfg, const Mat& v_t,
            const Conditioning& cond, int t, const NoiseSchedule& sched) {
  check_input(cfg, v_t, cond);
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors().size());
  for (const auto& tensor : params.tensors()) vars.push_back(tape.constant(tensor.value));
  Mat out = tape.value(forward(tape, vars, params, cfg, v_t, cond, t, sched));
  if (!out.allFinite()) throw DivergenceError("denoise produced non-finite output", 0);
  return out;
}

DenoiserModel::DenoiserModel(DenoiserConfig cfg, DenoiserParams params, NoiseSchedule sched)
    : cfg_(std::move(cfg)), params_(std::move(params)), sched_(std::move(sched)) {
  cfg_.validate();
}

Conditioning DenoiserModel::condition(const Volume& volume) const {
  return make_conditioning(volume, cfg_);
}

Mat DenoiserModel::predict_clean(const Mat& v_t, const Conditioning& cond, int t) const {
  return denoise(params_, cfg_, v_t, cond, t, sched_);
}

std::vector<NoiseDraw> draw_noise(std::span<const TrainingExample> batch,
                                  const NoiseSchedule& sched, Rng& rng) {
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (const auto& ex : batch) {
    NoiseDraw d;
    d.t = rng.uniform_int(1, sched.steps());
    d.eps = gaussian_matrix(ex.v0.rows(), ex.v0.cols(), rng);
    draws.push_back(std::move(d));
  }
  return draws;
}

double loss(const DenoiserParams& params, const DenoiserConfig& cfg,
            std::span<const TrainingExample> batch, const NoiseSchedule& sched, Rng& rng) {
  const auto draws = draw_noise(batch, sched, rng);
  return loss_at(params, cfg, batch, draws, sched);
}

double loss_at(const DenoiserParams& params, const DenoiserConfig& cfg,
               std::span<const TrainingExample> batch, std::span<const NoiseDraw> draws,
               const NoiseSchedule& sched) {
  return evaluate_batch(params, cfg, batch, draws, sched, false).loss;
}

LossAndGrad grad(const DenoiserParams& params, const DenoiserConfig& cfg,
                 std::span<const TrainingExample> batch, const NoiseSchedule& sched, Rng& rng) {
  const auto draws = draw_noise(batch, sched, rng);
  return grad_at(params, cfg, batch, draws, sched);
}

LossAndGrad grad_at(const DenoiserParams& params, const DenoiserConfig& cfg,
                    std::span<const TrainingExample> batch, std::span<const NoiseDraw> draws,
                    const NoiseSchedule& sched) {
  Evaluation e = evaluate_batch(params, cfg, batch, draws, sched, true);
  return {e.loss, std::move(e.grads)};
}

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw UsageError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw UsageError("weight_decay must be >= 0");
  if (eval_every < 1) throw UsageError("eval_every must be >= 1");
  if (val_draws < 1) throw UsageError("val_draws must be >= 1");
  if (noise_draws < 1) throw UsageError("noise_draws must be >= 1");
}

double validation_loss(const DenoiserParams& params, const DenoiserConfig& cfg,
                       std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                       const NoiseSchedule& sched) {
  std::vector<TrainingExample> batch;
  std::vector<NoiseDraw> draws;
  for (std::size_t j = 0; j < val_set.size(); ++j) {
    for (int r = 0; r < tcfg.val_draws; ++r) {
      Rng rng(mix_seed(mix_seed(tcfg.seed, 0x7A1), j * 1024 + static_cast<std::size_t>(r)));
      // Stratified timesteps keep the estimate comparable across epochs.
      NoiseDraw d;
      const double u = (r + rng.uniform()) / tcfg.val_draws;
      d.t = std::clamp(1 + static_cast<int>(u * sched.steps()), 1, sched.steps());
      d.eps = gaussian_matrix(val_set[j].v0.rows(), val_set[j].v0.cols(), rng);
      batch.push_back({val_set[j].v0, val_set[j].cond});
      draws.push_back(std::move(d));
    }
  }
  return loss_at(params, cfg, batch, draws, sched);
}

TrainResult train(const DenoiserConfig& cfg, DenoiserParams params,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                  const NoiseSchedule& sched, const EpochCallback& on_epoch) {
  std::vector<TrainingVariants> single;
  single.reserve(train_set.size());
  for (const auto& ex : train_set) single.push_back({ex});
  return train(cfg, std::move(params), single, val_set, tcfg, sched, on_epoch);
}

TrainResult train(const DenoiserConfig& cfg, DenoiserParams params,
                  std::span<const TrainingVariants> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& tcfg,
                  const NoiseSchedule& sched, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw UsageError("training requires non-empty train and validation splits");
  }
  for (const auto& v : train_set) {
    if (v.empty()) throw UsageError("training case without variants");
  }
  std::vector<Mat> m1;
  std::vector<Mat> m2;
  for (const auto& t : params.tensors()) {
    m1.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    m2.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
  }

  TrainResult result;
  result.best = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  {
    std::vector<TrainingExample> first;
    for (const auto& v : train_set) first.push_back(v.front());
    Rng probe(mix_seed(tcfg.seed, 0x1A17));
    result.initial_train_loss = loss(params, cfg, first, sched, probe);
  }

  const long steps_per_epoch =
      (static_cast<long>(train_set.size()) * tcfg.noise_draws + tcfg.batch_size - 1) / tcfg.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * tcfg.epochs;
  long step = 0;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    Rng rng(mix_seed(tcfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order;
    for (int pass = 0; pass < tcfg.noise_draws; ++pass) {
      std::vector<std::size_t> perm(train_set.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
      }
      order.insert(order.end(), perm.begin(), perm.end());
    }

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      std::vector<TrainingExample> batch;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingVariants& v = train_set[order[i]];
        const int pick = v.size() > 1 ? rng.uniform_int(0, static_cast<int>(v.size()) - 1) : 0;
        batch.push_back(v[static_cast<std::size_t>(pick)]);
      }
      LossAndGrad lg = grad(params, cfg, batch, sched, rng);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch), epoch);
      }
      const double lr = tcfg.cosine_decay
                            ? 0.5 * tcfg.learning_rate *
                                  (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps))
                            : tcfg.learning_rate;
      ++step;
      const double bc1 = 1.0 - std::pow(tcfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tcfg.beta2, static_cast<double>(step));
      auto& tensors = params.tensors();
      for (std::size_t k = 0; k < tensors.size(); ++k) {
        m1[k] = tcfg.beta1 * m1[k] + (1.0 - tcfg.beta1) * lg.grads[k];
        m2[k] = tcfg.beta2 * m2[k] + (1.0 - tcfg.beta2) * lg.grads[k].cwiseAbs2();
        Mat& w = tensors[k].value;
        w -= lr * tcfg.weight_decay * w;
        w.array() -= lr * (m1[k].array() / bc1) /
                     ((m2[k].array() / bc2).sqrt() + tcfg.adam_eps);
      }
      epoch_loss += lg.loss;
      ++batches;
    }
    if (!params.all_finite()) {
      throw DivergenceError("non-finite parameters at epoch " + std::to_string(epoch), epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / std::max(1, batches);
    if (epoch % tcfg.eval_every == 0 || epoch == tcfg.epochs) {
      const double v = validation_loss(params, cfg, val_set, tcfg, sched);
      if (!std::isfinite(v)) {
        throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch), epoch);
      }
      rec.val_loss = v;
      if (v < result.best_val_loss) {
        result.best_val_loss = v;
        result.best_epoch = epoch;
        result.best = params;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (tcfg.epochs == 0) {
    result.best_val_loss = validation_loss(params, cfg, val_set, tcfg, sched);
  }
  return result;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const DenoiserConfig& c = ckpt.config;
  std::ostringstream h;
  h << "VFCKPT 1\n";
  h << "rows " << c.rows() << "\n";
  h << "width " << c.width() << "\n";
  h << "grid " << c.codec.grid_x << ' ' << c.codec.grid_y << ' ' << c.codec.grid_z << "\n";
  h << "volume " << c.volume_dims.x << ' ' << c.volume_dims.y << ' ' << c.volume_dims.z << "\n";
  h << "bit_low " << fmt_double(c.codec.bit_low) << "\n";
  h << "bit_high " << fmt_double(c.codec.bit_high) << "\n";
  h << "padding " << (c.codec.padding == PaddingMode::kBitLow ? "bit_low" : "zero") << "\n";
  h << "hidden " << c.hidden << "\n";
  h << "heads " << c.heads << "\n";
  h << "ffn " << c.ffn << "\n";
  h << "time_dim " << c.time_dim << "\n";
  h << "pool " << c.pool << "\n";
  h << "token_threshold " << fmt_double(c.token_threshold) << "\n";
  h << "max_tokens " << c.max_tokens << "\n";
  h << "skip_connection " << (c.skip_connection ? 1 : 0) << "\n";
  h << "init_seed " << c.init_seed << "\n";
  h << "T " << ckpt.steps << "\n";
  h << "schedule_kind " << to_string(ckpt.schedule) << "\n";
  h << "param_count " << ckpt.params.count() << "\n";
  h << "tensors " << ckpt.params.tensors().size() << "\n";
  for (const auto& t : ckpt.params.tensors()) {
    h << "tensor " << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << "\n";
  }
  h << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const std::string header = h.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& t : ckpt.params.tensors()) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      std::uint64_t raw = std::bit_cast<std::uint64_t>(t.value.data()[i]);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((raw >> (8 * b)) & 0xFF);
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string where = path.string();
  std::map<std::string, std::string> fields;
  std::vector<std::tuple<std::string, int, int>> table;
  std::string line;
  if (!std::getline(in, line) || line != "VFCKPT 1") {
    throw FormatError(where + ": not a checkpoint (bad magic line)");
  }
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "tensor") {
      std::string name;
      int r = 0;
      int c = 0;
      if (!(ls >> name >> r >> c) || r < 0 || c < 0) throw FormatError(where + ": bad tensor line '" + line + "'");
      table.emplace_back(name, r, c);
    } else {
      std::string rest;
      std::getline(ls >> std::ws, rest);
      fields[key] = rest;
    }
  }
  if (!ended) throw FormatError(where + ": header missing 'end'");

  const auto get = [&](const std::string& k) -> const std::string& {
    auto it = fields.find(k);
    if (it == fields.end()) throw FormatError(where + ": header missing '" + k + "'");
    return it->second;
  };
  const auto get_int = [&](const std::string& k) {
    try {
      return std::stoll(get(k));
    } catch (const std::logic_error&) {
      throw FormatError(where + ": bad integer for '" + k + "'");
    }
  };
  const auto get_double = [&](const std::string& k) {
    try {
      return std::stod(get(k));
    } catch (const std::logic_error&) {
      throw FormatError(where + ": bad number for '" + k + "'");
    }
  };
  const auto get_triple = [&](const std::string& k) {
    std::istringstream s(get(k));
    std::array<int, 3> v{};
    if (!(s >> v[0] >> v[1] >> v[2])) throw FormatError(where + ": bad triple for '" + k + "'");
    return v;
  };

  Checkpoint ck;
  DenoiserConfig& c = ck.config;
  const auto grid = get_triple("grid");
  c.codec.grid_x = grid[0];
  c.codec.grid_y = grid[1];
  c.codec.grid_z = grid[2];
  c.codec.max_len = static_cast<int>(get_int("rows"));
  c.codec.bit_low = get_double("bit_low");
  c.codec.bit_high = get_double("bit_high");
  c.codec.lambda = 0.5 * (c.codec.bit_low + c.codec.bit_high);
  c.codec.flag_threshold = c.codec.lambda;
  c.codec.padding = get("padding") == "zero" ? PaddingMode::kZero : PaddingMode::kBitLow;
  const auto vol = get_triple("volume");
  c.volume_dims = {vol[0], vol[1], vol[2]};
  c.hidden = static_cast<int>(get_int("hidden"));
  c.heads = static_cast<int>(get_int("heads"));
  c.ffn = static_cast<int>(get_int("ffn"));
  c.time_dim = static_cast<int>(get_int("time_dim"));
  c.pool = static_cast<int>(get_int("pool"));
  c.token_threshold = get_double("token_threshold");
  c.max_tokens = static_cast<int>(get_int("max_tokens"));
  c.skip_connection = get_int("skip_connection") != 0;
  c.init_seed = static_cast<std::uint64_t>(get_int("init_seed"));
  ck.steps = static_cast<int>(get_int("T"));
  try {
    ck.schedule = parse_schedule_kind(get("schedule_kind"));
  } catch (const UsageError& e) {
    throw FormatError(where + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw FormatError(where + ": invalid architecture: " + e.what());
  }
  if (get_int("width") != c.width()) throw FormatError(where + ": width inconsistent with grid");

  const auto expected = layout(c);
  if (expected.size() != table.size()) throw FormatError(where + ": tensor table does not match architecture");
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& [name, r, cols] = table[i];
    if (name != expected[i].name || r != expected[i].rows || cols != expected[i].cols) {
      throw FormatError(where + ": tensor '" + name + "' does not match architecture");
    }
    Mat m(r, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw FormatError(where + ": truncated tensor data in '" + name + "'");
      }
      std::uint64_t raw = 0;
      for (int b = 0; b < 8; ++b) raw |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      m.data()[k] = std::bit_cast<double>(raw);
    }
    tensors.push_back({name, std::move(m)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(where + ": trailing bytes after tensors");
  ck.params = DenoiserParams(std::move(tensors));
  if (!ck.params.all_finite()) throw FormatError(where + ": non-finite parameter values");
  return ck;
}

std::vector<std::string> checkpoint_mismatches(const Checkpoint& ckpt, const DenoiserConfig& cfg,
                                               int steps, ScheduleKind kind) {
  std::vector<std::string> diff;
  const DenoiserConfig& a = ckpt.config;
  const auto check = [&](bool same, const std::string& what) {
    if (!same) diff.push_back(what);
  };
  check(a.codec.max_len == cfg.codec.max_len,
        "max_len (checkpoint " + std::to_string(a.codec.max_len) + ", config " + std::to_string(cfg.codec.max_len) + ")");
  check(a.codec.grid_x == cfg.codec.grid_x && a.codec.grid_y == cfg.codec.grid_y &&
            a.codec.grid_z == cfg.codec.grid_z,
        "grid");
  check(a.codec.bit_low == cfg.codec.bit_low && a.codec.bit_high == cfg.codec.bit_high, "bit_low/bit_high");
  check(a.codec.padding == cfg.codec.padding, "padding");
  check(a.volume_dims == cfg.volume_dims,
        "volume dims (checkpoint " + to_string(a.volume_dims) + ", config " + to_string(cfg.volume_dims) + ")");
  check(a.hidden == cfg.hidden, "hidden (checkpoint " + std::to_string(a.hidden) + ", config " + std::to_string(cfg.hidden) + ")");
  check(a.heads == cfg.heads, "heads");
  check(a.ffn == cfg.ffn, "ffn");
  check(a.time_dim == cfg.time_dim, "time_dim");
  check(a.pool == cfg.pool, "pool");
  check(a.token_threshold == cfg.token_threshold, "token_threshold");
  check(a.max_tokens == cfg.max_tokens, "max_tokens");
  check(a.skip_connection == cfg.skip_connection, "skip_connection");
  check(ckpt.steps == steps, "T (checkpoint " + std::to_string(ckpt.steps) + ", config " + std::to_string(steps) + ")");
  check(ckpt.schedule == kind, "schedule_kind");
  return diff;
}

void write_loss_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << fmt_double(r.train_loss) << ',';
    if (r.val_loss) out << fmt_double(*r.val_loss);
    out << '\n';
  }
}

}  // namespace vf
