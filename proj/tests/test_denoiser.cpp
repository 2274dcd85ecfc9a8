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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fd_check.hpp"
#include "test_util.hpp"
#include "vesselfusion/denoiser.hpp"

using namespace vf;
using vf::testing::tiny_config;
using vf::testing::tiny_example;

namespace {

const NoiseSchedule kSched(20, ScheduleKind::kCosine);

Mat random_input(const DenoiserConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_matrix(cfg.rows(), cfg.width(), rng);
}

}  // namespace

TEST_CASE("tiny configuration has the intended shape") {
  const DenoiserConfig cfg = tiny_config();
  CHECK(cfg.rows() == 4);
  CHECK(cfg.width() == 10);
  CHECK(cfg.token_features() == 15);
  CHECK_THROWS_AS([] {
    DenoiserConfig c = tiny_config();
    c.heads = 3;
    c.validate();
  }(), UsageError);
  CHECK_THROWS_AS([] {
    DenoiserConfig c = tiny_config();
    c.time_dim = 5;
    c.validate();
  }(), UsageError);
}

TEST_CASE("parameter gradients match central differences") {
  for (bool skip : {true, false}) {
    const auto r = vf::testing::denoiser_gradient_check(1e-4, 3, skip);
    INFO("worst tensor " << r.worst_tensor);
    CHECK(r.checked > 1000);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("all-zero weights return the output bias on every row") {
  const DenoiserConfig cfg = tiny_config(false);
  DenoiserParams p = zero_params(cfg);
  Mat bias(1, cfg.width());
  for (int j = 0; j < cfg.width(); ++j) bias(0, j) = 0.1 * j - 0.4;
  p["out.b"] = bias;
  const TrainingExample ex = tiny_example(cfg, 0);
  const Mat out = denoise(p, cfg, random_input(cfg, 1), ex.cond, 7, kSched);
  for (int r = 0; r < cfg.rows(); ++r) CHECK(out.row(r).isApprox(bias.row(0), 1e-15));
}

TEST_CASE("skip connection with zero weights scales the input by sqrt(gamma)") {
  const DenoiserConfig cfg = tiny_config(true);
  const DenoiserParams p = zero_params(cfg);
  const TrainingExample ex = tiny_example(cfg, 0);
  const Mat v = random_input(cfg, 2);
  for (int t : {1, 10, 20}) {
    const Mat out = denoise(p, cfg, v, ex.cond, t, kSched);
    CHECK((out - std::sqrt(kSched.gamma(t)) * v).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("output rows follow a permutation of the input rows") {
  const DenoiserConfig cfg = tiny_config();
  const DenoiserParams p = vf::testing::tiny_params(cfg, 4);
  const TrainingExample ex = tiny_example(cfg, 1);
  const Mat v = random_input(cfg, 3);
  const int perm[] = {2, 0, 3, 1};
  Mat pv(v.rows(), v.cols());
  for (int r = 0; r < 4; ++r) pv.row(r) = v.row(perm[r]);
  const Mat out = denoise(p, cfg, v, ex.cond, 5, kSched);
  const Mat pout = denoise(p, cfg, pv, ex.cond, 5, kSched);
  for (int r = 0; r < 4; ++r) CHECK((pout.row(r) - out.row(perm[r])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("denoise rejects wrong shapes and non-finite input") {
  const DenoiserConfig cfg = tiny_config();
  const DenoiserParams p = init_params(cfg);
  const TrainingExample ex = tiny_example(cfg, 0);
  CHECK_THROWS_AS(denoise(p, cfg, Mat::Zero(3, cfg.width()), ex.cond, 1, kSched), UsageError);
  Mat bad = Mat::Zero(cfg.rows(), cfg.width());
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(denoise(p, cfg, bad, ex.cond, 1, kSched), UsageError);
  Conditioning short_cond = ex.cond;
  short_cond.pooled.resize(3);
  CHECK_THROWS_AS(denoise(p, cfg, random_input(cfg, 1), short_cond, 1, kSched), UsageError);
}

TEST_CASE("timestep embedding") {
  const auto e0 = embed_timestep(0, 8);
  CHECK(e0.size() == 8);
  for (int k = 0; k < 4; ++k) {
    CHECK(e0(k) == 0.0);
    CHECK(e0(4 + k) == 1.0);
  }
  const auto e5 = embed_timestep(5, 8);
  CHECK(e5(0) == doctest::Approx(std::sin(5.0)));
  CHECK(e5(4) == doctest::Approx(std::cos(5.0)));
  CHECK(e5(1) == doctest::Approx(std::sin(5.0 * std::pow(10000.0, -0.25))));
  for (int k = 0; k < 4; ++k) CHECK(e5(k) * e5(k) + e5(4 + k) * e5(4 + k) == doctest::Approx(1.0));
  CHECK((embed_timestep(6, 8) - e5).norm() > 0.1);
  CHECK_THROWS_AS(embed_timestep(1, 7), UsageError);
}

TEST_CASE("pooling and volume encoding") {
  const DenoiserConfig cfg = tiny_config();
  std::vector<float> vox(64, 0.0f);
  vox[cfg.volume_dims.index({0, 0, 0})] = 8.0f;
  vox[cfg.volume_dims.index({3, 3, 3})] = 4.0f;
  const Volume vol(cfg.volume_dims, vox);
  const auto pooled = pool_volume(vol, 2);
  REQUIRE(pooled.size() == 8);
  CHECK(pooled(0) == 1.0);
  CHECK(pooled(7) == 0.5);
  CHECK(pooled.segment(1, 6).cwiseAbs().maxCoeff() == 0.0);

  DenoiserParams p = init_params(cfg);
  p["cond.b"].setConstant(0.25);
  const auto zero_code = encode_volume(p, cfg, Volume::zeros(cfg.volume_dims));
  CHECK((zero_code.array() - 0.25).abs().maxCoeff() == 0.0);
  std::vector<float> ones(64, 2.0f);
  const auto code = encode_volume(p, cfg, Volume(cfg.volume_dims, ones));
  const Eigen::RowVectorXd expected = 2.0 * p["cond.w"].colwise().sum().array() + 0.25;
  CHECK((code - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(encode_volume(p, cfg, Volume::zeros({4, 4, 5})), UsageError);
}

TEST_CASE("image tokens are bright neighbourhoods with their coordinates") {
  const DenoiserConfig cfg = tiny_config();
  const Mat tokens = volume_tokens(Volume::zeros(cfg.volume_dims), cfg);
  CHECK(tokens.rows() == 0);
  std::vector<float> ones(64, 1.0f);
  DenoiserConfig capped = cfg;
  capped.max_tokens = 10;
  const Mat all = volume_tokens(Volume(cfg.volume_dims, ones), capped);
  CHECK(all.rows() == 10);
  CHECK(all.cols() == cfg.token_features());
  CHECK(all(0, 0) == 1.0);
  CHECK(all(0, 1) == 1.0);
}

TEST_CASE("loss is non-negative and reproducible from fixed draws") {
  const DenoiserConfig cfg = tiny_config();
  const DenoiserParams p = init_params(cfg);
  const std::vector<TrainingExample> batch{tiny_example(cfg, 0), tiny_example(cfg, 2)};
  Rng a(9);
  Rng b(9);
  const double la = loss(p, cfg, batch, kSched, a);
  const double lb = loss(p, cfg, batch, kSched, b);
  CHECK(la >= 0.0);
  CHECK(la == lb);
  Rng c(9);
  const auto draws = draw_noise(batch, kSched, c);
  CHECK(loss_at(p, cfg, batch, draws, kSched) == la);
  CHECK(grad_at(p, cfg, batch, draws, kSched).loss == doctest::Approx(la).epsilon(1e-14));
  for (const auto& d : draws) {
    CHECK(d.t >= 1);
    CHECK(d.t <= kSched.steps());
  }
}

TEST_CASE("training") {
  const DenoiserConfig cfg = tiny_config();
  const std::vector<TrainingExample> train_set{tiny_example(cfg, 0), tiny_example(cfg, 1),
                                               tiny_example(cfg, 2)};
  const std::vector<TrainingExample> val_set{tiny_example(cfg, 3)};
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 2;
  tc.learning_rate = 1e-2;
  tc.seed = 4;

  SUBCASE("decreases the loss and is deterministic") {
    const TrainResult r1 = train(cfg, init_params(cfg), train_set, val_set, tc, kSched);
    const TrainResult r2 = train(cfg, init_params(cfg), train_set, val_set, tc, kSched);
    CHECK(r1.best == r2.best);
    CHECK(r1.best_epoch == r2.best_epoch);
    REQUIRE(r1.history.size() == 40);
    double late = 0.0;
    for (int i = 30; i < 40; ++i) late += r1.history[static_cast<std::size_t>(i)].train_loss / 10.0;
    CHECK(late < r1.initial_train_loss);
    CHECK(r1.best_val_loss <= *r1.history.front().val_loss);
  }
  SUBCASE("zero learning rate leaves the parameters untouched") {
    tc.learning_rate = 0.0;
    tc.epochs = 3;
    const DenoiserParams init = init_params(cfg);
    CHECK(train(cfg, init, train_set, val_set, tc, kSched).best == init);
  }
  SUBCASE("callback sees every epoch and validation is sparse with eval_every") {
    tc.epochs = 5;
    tc.eval_every = 2;
    int calls = 0;
    const TrainResult r =
        train(cfg, init_params(cfg), train_set, val_set, tc, kSched, [&](const EpochRecord&) { ++calls; });
    CHECK(calls == 5);
    CHECK_FALSE(r.history[0].val_loss.has_value());
    CHECK(r.history[1].val_loss.has_value());
    CHECK(r.history[4].val_loss.has_value());
  }
  SUBCASE("cosine decay and variants are accepted") {
    tc.epochs = 3;
    tc.cosine_decay = true;
    tc.noise_draws = 2;
    std::vector<TrainingVariants> variants{{train_set[0], train_set[1]}, {train_set[2]}};
    const TrainResult r = train(cfg, init_params(cfg), std::span<const TrainingVariants>(variants),
                                std::span<const TrainingExample>(val_set), tc, kSched);
    CHECK(r.best.all_finite());
  }
  SUBCASE("invalid settings") {
    tc.batch_size = 0;
    CHECK_THROWS_AS(train(cfg, init_params(cfg), train_set, val_set, tc, kSched), UsageError);
    tc.batch_size = 2;
    CHECK_THROWS_AS(train(cfg, init_params(cfg), train_set, {}, tc, kSched), UsageError);
  }
  SUBCASE("divergence is detected") {
    tc.learning_rate = 1e300;
    tc.epochs = 5;
    try {
      train(cfg, init_params(cfg), train_set, val_set, tc, kSched);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() >= 1);
    }
  }
}

TEST_CASE("checkpoint round trip and compatibility") {
  vf::testing::TempDir dir("ckpt");
  Checkpoint ck;
  ck.config = tiny_config();
  ck.params = vf::testing::tiny_params(ck.config, 8);
  ck.steps = 20;
  save_checkpoint(ck, dir / "m.ckpt");
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.params == ck.params);
  CHECK(back.steps == 20);
  CHECK(back.schedule == ScheduleKind::kCosine);
  CHECK(checkpoint_mismatches(back, ck.config, 20, ScheduleKind::kCosine).empty());
  save_checkpoint(back, dir / "again.ckpt");
  CHECK(vf::testing::read_file(dir / "m.ckpt") == vf::testing::read_file(dir / "again.ckpt"));

  DenoiserConfig other = ck.config;
  other.hidden = 16;
  other.heads = 4;
  const auto diff = checkpoint_mismatches(back, other, 10, ScheduleKind::kLinear);
  CHECK(diff.size() == 4);
  CHECK(diff.front().find("hidden") != std::string::npos);

  const std::string bytes = vf::testing::read_file(dir / "m.ckpt");
  vf::testing::write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), FormatError);
  vf::testing::write_file(dir / "junk.ckpt", "hello\n");
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), FormatError);
}

TEST_CASE("loss csv") {
  vf::testing::TempDir dir("losscsv");
  std::vector<EpochRecord> h{{1, 0.5, 0.25}, {2, 0.125, std::nullopt}};
  write_loss_csv(h, dir / "l.csv");
  CHECK(vf::testing::read_file(dir / "l.csv") == "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,\n");
}

TEST_CASE("embedding norms and distinctness over the timestep table") {
  std::vector<Eigen::RowVectorXd> all;
  for (int t = 0; t <= 1000; ++t) {
    all.push_back(embed_timestep(t, 32));
    CHECK(all.back().norm() == doctest::Approx(std::sqrt(16.0)));
  }
  double closest = 1e9;
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) closest = std::min(closest, (all[a] - all[b]).norm());
  }
  CHECK(closest > 1e-6);
}

TEST_CASE("output shape follows L") {
  for (int len : {8, 64, 320}) {
    DenoiserConfig cfg = tiny_config();
    cfg.codec.max_len = len;
    const Mat v = random_input(cfg, 6);
    const TrainingExample ex = tiny_example(cfg, 0);
    const Mat out = denoise(init_params(cfg), cfg, v, ex.cond, 4, kSched);
    CHECK(out.rows() == len);
    CHECK(out.cols() == cfg.width());
  }
}

TEST_CASE("a zero-loss point has zero gradients") {
  const DenoiserConfig cfg = tiny_config(false);
  DenoiserParams p = zero_params(cfg);
  Mat row(1, cfg.width());
  for (int j = 0; j < cfg.width(); ++j) row(0, j) = j % 2 ? 1.0 : -1.0;
  p["out.b"] = row;
  TrainingExample ex = tiny_example(cfg, 0);
  ex.v0 = row.replicate(cfg.rows(), 1);
  const std::vector<TrainingExample> batch{ex, ex};
  Rng rng(1);
  const auto draws = draw_noise(batch, kSched, rng);
  const LossAndGrad lg = grad_at(p, cfg, batch, draws, kSched);
  CHECK(lg.loss == 0.0);
  for (const Mat& g : lg.grads) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  const DenoiserConfig cfg = tiny_config();
  const DenoiserParams p = vf::testing::tiny_params(cfg, 2);
  const std::vector<TrainingExample> one{tiny_example(cfg, 0), tiny_example(cfg, 1)};
  Rng rng(3);
  const auto draws = draw_noise(one, kSched, rng);
  std::vector<TrainingExample> two = one;
  two.insert(two.end(), one.begin(), one.end());
  std::vector<NoiseDraw> draws2 = draws;
  draws2.insert(draws2.end(), draws.begin(), draws.end());
  const LossAndGrad a = grad_at(p, cfg, one, draws, kSched);
  const LossAndGrad b = grad_at(p, cfg, two, draws2, kSched);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
  for (std::size_t k = 0; k < a.grads.size(); ++k) {
    CHECK((a.grads[k] - b.grads[k]).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + a.grads[k].cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("200 steps on a single case reduce the training loss") {
  const DenoiserConfig cfg = tiny_config();
  const std::vector<TrainingExample> data{tiny_example(cfg, 1)};
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 1;
  tc.learning_rate = 3e-3;
  tc.val_draws = 2;
  tc.eval_every = 50;
  const TrainResult r = train(cfg, init_params(cfg), data, data, tc, kSched);
  double late = 0.0;
  for (int i = 150; i < 200; ++i) late += r.history[static_cast<std::size_t>(i)].train_loss / 50.0;
  CHECK(late < r.initial_train_loss);
  for (const auto& rec : r.history) {
    if (rec.val_loss) CHECK(r.best_val_loss <= *rec.val_loss);
  }
}
