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

#include <array>
#include <vector>

#include "vesselfusion/common.hpp"
#include "vesselfusion/volume_io.hpp"

namespace vf {

enum class PaddingMode { kBitLow, kZero };

/// Coarse-to-fine codec parameters.
///
/// Each point becomes one row of width 1 + (B_x + B_y + B_z) + 3:
///   [flag | grid-cell bits for x, y, z (MSB first) | offsets dx, dy, dz]
/// where B_a = log2(G_a). Binary 0/1 are embedded as bit_low/bit_high.
struct C2FConfig {
  int grid_x = 8;
  int grid_y = 8;
  int grid_z = 8;
  int max_len = 64;
  double bit_low = -1.0;
  double bit_high = 1.0;
  double lambda = 0.0;
  double flag_threshold = 0.0;
  PaddingMode padding = PaddingMode::kBitLow;

  /// Throws UsageError when any invariant is violated.
  void validate() const;

  int grid(int axis) const { return axis == 0 ? grid_x : (axis == 1 ? grid_y : grid_z); }
  int bits(int axis) const;
  int total_bits() const { return bits(0) + bits(1) + bits(2); }
  /// Row width d.
  int width() const { return 1 + total_bits() + 3; }
  /// Column of the first bit of an axis.
  int bit_column(int axis) const;
  int offset_column(int axis) const { return 1 + total_bits() + axis; }
  double padding_value() const { return padding == PaddingMode::kBitLow ? bit_low : 0.0; }
};

struct C2FElement {
  double flag = 0.0;
  std::vector<double> bits;         // B_x + B_y + B_z entries
  std::array<double, 3> offsets{};  // normalized by grid-cell size, in [-0.5, 0.5)
  std::array<int, 3> cells{};       // grid-cell index per axis
};

/// Fixed-size L x d matrix; valid rows first, padding after.
struct C2FMatrix {
  Mat values;
  int valid_rows = 0;
};

/// MSB-first binary digits of g. Throws UsageError unless 0 <= g < 2^bits.
std::vector<int> binary_encode(int g, int bits);
int binary_decode(const std::vector<int>& bits);

/// Grid-cell size s_a = V_a / G_a.
double cell_size(const Dims& dims, const C2FConfig& cfg, int axis);

/// Throws UsageError if p lies outside dims.
C2FElement encode_point(const Voxel& p, const Dims& dims, const C2FConfig& cfg);

/// Writes an element into a matrix row of width cfg.width().
void write_row(const C2FElement& e, Mat& m, int row);

/// Throws UsageError if |c| > L or a point lies outside dims.
C2FMatrix encode_centerline(const Centerline& c, const Dims& dims, const C2FConfig& cfg);

/// Total on arbitrary real matrices: rows with flag <= flag_threshold or any
/// non-finite entry are dropped, bits are thresholded at lambda, coordinates
/// are rounded and clamped into dims.
Centerline decode_matrix(const Mat& v, const Dims& dims, const C2FConfig& cfg);

/// Baseline codec without the coarse/fine split: [flag, x, y, z] with each
/// coordinate affinely mapped to [-1, 1]. Used to compare noise robustness.
struct RawCoordinateCodec {
  int max_len = 64;
  double bit_low = -1.0;
  double bit_high = 1.0;
  double flag_threshold = 0.0;

  int width() const { return 4; }
  Mat encode(const Centerline& c, const Dims& dims) const;
  Centerline decode(const Mat& v, const Dims& dims) const;
};

}  // namespace vf
