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

#include "vesselfusion/autodiff.hpp"

#include <cmath>
#include <string>

namespace vf::ad {

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backward) {
  nodes_.push_back(Node{std::move(value), Mat(), requires_grad,
                        requires_grad ? std::move(backward) : nullptr});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Mat value) {
  return push(std::move(value), true, [](Tape&, const Mat&) {});
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw UsageError("matmul: inner dimension mismatch");
  Mat out = value(a) * value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  if (value(a).cols() != value(b).cols()) throw UsageError("matmul_nt: width mismatch");
  Mat out = value(a) * value(b).transpose();
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b));
    if (t.needs(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw UsageError("add: shape mismatch");
  }
  Mat out = value(a) + value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw UsageError("add_row: expected 1 x " + std::to_string(value(a).cols()) + " row");
  }
  Mat out = value(a).rowwise() + value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.needs(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  Mat out = s * value(a);
  return push(std::move(out), needs(a), [a, s](Tape& t, const Mat& g) { t.accumulate(a, s * g); });
}

Var Tape::affine_mix(Var a, double a_scale, const Mat& other, double other_scale) {
  if (value(a).rows() != other.rows() || value(a).cols() != other.cols()) {
    throw UsageError("affine_mix: shape mismatch");
  }
  Mat out = a_scale * value(a) + other_scale * other;
  return push(std::move(out), needs(a),
              [a, a_scale](Tape& t, const Mat& g) { t.accumulate(a, a_scale * g); });
}

Var Tape::silu(Var a) {
  const Mat& x = value(a);
  Mat sig = (1.0 + (-x.array()).exp()).inverse().matrix();
  Mat out = (x.array() * sig.array()).matrix();
  return push(std::move(out), needs(a), [a, sig = std::move(sig)](Tape& t, const Mat& g) {
    const auto& x = t.value(a).array();
    const auto s = sig.array();
    t.accumulate(a, (g.array() * s * (1.0 + x * (1.0 - s))).matrix());
  });
}

Var Tape::softmax_rows(Var a) {
  const Mat& x = value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return push(out, needs(a), [a, y = out](Tape& t, const Mat& g) {
    const Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum().matrix();
    Mat dx = y.array() * (g.colwise() - dots).array();
    t.accumulate(a, dx);
  });
}

Var Tape::layer_norm(Var a, Var gain, Var bias, double eps) {
  const Mat& x = value(a);
  const Eigen::Index n = x.cols();
  if (value(gain).cols() != n || value(bias).cols() != n) {
    throw UsageError("layer_norm: gain/bias width mismatch");
  }
  Mat xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Mat out = (xhat.array().rowwise() * value(gain).row(0).array()).matrix();
  out.rowwise() += value(bias).row(0);
  const bool req = needs(a) || needs(gain) || needs(bias);
  return push(std::move(out), req,
              [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, const Mat& g) {
                if (t.needs(gain)) t.accumulate(gain, (g.array() * xhat.array()).colwise().sum());
                if (t.needs(bias)) t.accumulate(bias, g.colwise().sum());
                if (!t.needs(a)) return;
                const Mat dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
                const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                const Eigen::VectorXd m2 = (dxhat.array() * xhat.array()).rowwise().mean();
                Mat dx(dxhat.rows(), dxhat.cols());
                for (Eigen::Index r = 0; r < dx.rows(); ++r) {
                  dx.row(r) = inv_std(r) *
                              (dxhat.row(r).array() - m1(r) - xhat.row(r).array() * m2(r)).matrix();
                }
                t.accumulate(a, dx);
              });
}

Var Tape::slice_cols(Var a, int start, int count) {
  const Mat& x = value(a);
  if (start < 0 || count < 0 || start + count > x.cols()) throw UsageError("slice_cols: out of range");
  Mat out = x.middleCols(start, count);
  return push(std::move(out), needs(a), [a, start, count](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    Mat full = Mat::Zero(x.rows(), x.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw UsageError("concat_cols: row mismatch");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), req, [inputs = std::move(inputs)](Tape& t, const Mat& g) {
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index c = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(at, c));
      at += c;
    }
  });
}

Var Tape::mse(Var a, const Mat& target) {
  const Mat& x = value(a);
  if (x.rows() != target.rows() || x.cols() != target.cols()) throw UsageError("mse: shape mismatch");
  Mat diff = x - target;
  const double n = static_cast<double>(diff.size());
  Mat out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return push(std::move(out), needs(a), [a, diff = std::move(diff), n](Tape& t, const Mat& g) {
    t.accumulate(a, (2.0 * g(0, 0) / n) * diff);
  });
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) throw UsageError("backward: root must be a scalar");
  for (Node& n : nodes_) n.grad = Mat();
  Node& r = nodes_[static_cast<std::size_t>(root.id)];
  if (!r.requires_grad) return;
  r.grad = Mat::Ones(1, 1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    // Ops only feed earlier nodes, so n.grad is not modified while in use.
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
  }
}

}  // namespace vf::ad
