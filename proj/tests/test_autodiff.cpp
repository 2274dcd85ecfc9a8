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
#include <functional>

#include "doctest.h"
#include "vesselfusion/autodiff.hpp"

using namespace vf;
using vf::ad::Tape;
using vf::ad::Var;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

Mat random_matrix(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

double evaluate(const Builder& build, const std::vector<Mat>& inputs, const Mat& target) {
  Tape tape;
  std::vector<Var> vars;
  for (const Mat& m : inputs) vars.push_back(tape.parameter(m));
  const Var loss = tape.mse(build(tape, vars), target);
  return tape.value(loss)(0, 0);
}

/// Largest relative error between reverse-mode and central differences.
double gradient_error(const Builder& build, std::vector<Mat> inputs, std::uint64_t seed) {
  Rng rng(seed);
  Mat target;
  {
    Tape probe;
    std::vector<Var> vars;
    for (const Mat& m : inputs) vars.push_back(probe.parameter(m));
    const Mat& out = probe.value(build(probe, vars));
    target = random_matrix(static_cast<int>(out.rows()), static_cast<int>(out.cols()), rng);
  }
  Tape tape;
  std::vector<Var> vars;
  for (const Mat& m : inputs) vars.push_back(tape.parameter(m));
  tape.backward(tape.mse(build(tape, vars), target));

  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Mat analytic = tape.grad(vars[k]);
    REQUIRE(analytic.rows() == inputs[k].rows());
    REQUIRE(analytic.cols() == inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double keep = inputs[k].data()[i];
      inputs[k].data()[i] = keep + h;
      const double up = evaluate(build, inputs, target);
      inputs[k].data()[i] = keep - h;
      const double down = evaluate(build, inputs, target);
      inputs[k].data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward values of the elementary ops") {
  Tape t;
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  Mat b(2, 2);
  b << 0, 1, 1, 0;
  const Var va = t.constant(a);
  const Var vb = t.constant(b);
  CHECK(t.value(t.matmul(va, vb)) == a * b);
  CHECK(t.value(t.matmul_nt(va, vb)) == a * b.transpose());
  CHECK(t.value(t.add(va, vb)) == a + b);
  CHECK(t.value(t.scale(va, 3.0)) == 3.0 * a);
  Mat row(1, 2);
  row << 10, 20;
  Mat expect(2, 2);
  expect << 11, 22, 13, 24;
  CHECK(t.value(t.add_row(va, t.constant(row))) == expect);
  const Mat sm = t.value(t.softmax_rows(va));
  CHECK(sm.row(0).sum() == doctest::Approx(1.0));
  CHECK(sm(0, 1) == doctest::Approx(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0))));
  CHECK(t.value(t.silu(va))(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(t.value(t.slice_cols(va, 1, 1)) == a.col(1));
  const Var parts[] = {vb, va};
  Mat cat(2, 4);
  cat << b, a;
  CHECK(t.value(t.concat_cols(parts)) == cat);
  CHECK(t.value(t.mse(va, b))(0, 0) == doctest::Approx((1 + 1 + 4 + 16) / 4.0));
  const Mat ln = t.value(t.layer_norm(va, t.constant(Mat::Ones(1, 2)), t.constant(Mat::Zero(1, 2))));
  CHECK(ln(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(ln(1, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("each op's gradient matches central differences") {
  Rng rng(17);
  auto m = [&](int r, int c) { return random_matrix(r, c, rng); };
  const double tol = 1e-6;
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); },
                       {m(3, 4), m(4, 2)}, 1) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.matmul_nt(v[0], v[1]); },
                       {m(3, 4), m(5, 4)}, 2) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); },
                       {m(3, 4), m(3, 4)}, 3) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.add_row(v[0], v[1]); },
                       {m(3, 4), m(1, 4)}, 4) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -2.5); },
                       {m(2, 3)}, 5) < tol);
  const Mat other = m(2, 3);
  CHECK(gradient_error([&](Tape& t, const std::vector<Var>& v) { return t.affine_mix(v[0], 0.3, other, 0.7); },
                       {m(2, 3)}, 6) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.silu(v[0]); }, {m(3, 3)}, 7) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.softmax_rows(t.scale(v[0], 3.0)); },
                       {m(3, 5)}, 8) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); },
                       {m(4, 6), m(1, 6), m(1, 6)}, 9) < tol);
  CHECK(gradient_error([](Tape& t, const std::vector<Var>& v) { return t.slice_cols(v[0], 1, 2); },
                       {m(3, 4)}, 10) < tol);
  CHECK(gradient_error(
            [](Tape& t, const std::vector<Var>& v) {
              const Var parts[] = {v[0], v[1], v[0]};
              return t.concat_cols(parts);
            },
            {m(3, 2), m(3, 1)}, 11) < tol);
}

TEST_CASE("shared subexpressions accumulate gradients") {
  Rng rng(18);
  const auto build = [](Tape& t, const std::vector<Var>& v) {
    const Var h = t.silu(t.matmul(v[0], v[1]));
    return t.add(t.matmul(h, t.scale(v[1], 0.5)), t.softmax_rows(t.matmul_nt(h, h)));
  };
  CHECK(gradient_error(build, {random_matrix(4, 4, rng), random_matrix(4, 4, rng)}, 12) < 1e-6);
}

TEST_CASE("constants receive no gradient") {
  Tape t;
  const Var c = t.constant(Mat::Ones(2, 2));
  const Var p = t.parameter(Mat::Ones(2, 2));
  t.backward(t.mse(t.matmul(c, p), Mat::Zero(2, 2)));
  CHECK(t.grad(c).size() == 0);
  CHECK(t.grad(p).size() == 4);
  CHECK(t.grad(p)(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("shape errors are reported") {
  Tape t;
  const Var a = t.constant(Mat::Ones(2, 3));
  CHECK_THROWS_AS(t.matmul(a, a), UsageError);
  CHECK_THROWS_AS(t.add(a, t.constant(Mat::Ones(3, 2))), UsageError);
  CHECK_THROWS_AS(t.backward(a), UsageError);
}
