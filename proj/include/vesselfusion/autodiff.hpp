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
#include <span>
#include <vector>

#include "vesselfusion/common.hpp"

namespace vf::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Minimal reverse-mode tape over dense matrices. Each op records its value
/// eagerly and a closure that scatters the output gradient to its inputs.
/// Row vectors (1 x m) act as broadcast biases where noted.
class Tape {
 public:
  Var constant(Mat value);
  /// Leaf whose gradient is accumulated.
  Var parameter(Mat value);

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Gradient of the last backward() root; zero-sized if v never received one.
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  Var matmul(Var a, Var b);
  /// a * b^T.
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds the 1 x m row to every row of a.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  /// Multiplies every entry by a constant scalar and adds c * other (a constant matrix).
  Var affine_mix(Var a, double a_scale, const Mat& other, double other_scale);
  Var silu(Var a);
  Var softmax_rows(Var a);
  /// Per-row normalization with gain and bias rows.
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
  Var slice_cols(Var a, int start, int count);
  Var concat_cols(std::span<const Var> parts);
  /// Scalar mean of squared differences against a constant target.
  Var mse(Var a, const Mat& target);

  /// Seeds d(root)/d(root) = 1 for a 1 x 1 root and propagates.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Mat&)> backward;
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backward);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  void accumulate(Var v, const Mat& g);

  std::vector<Node> nodes_;
};

}  // namespace vf::ad
