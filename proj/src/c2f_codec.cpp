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

#include "vesselfusion/c2f_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace vf {
namespace {

bool is_power_of_two(int g) { return g >= 2 && std::has_single_bit(static_cast<unsigned>(g)); }

}  // namespace

void C2FConfig::validate() const {
  for (int axis = 0; axis < 3; ++axis) {
    if (!is_power_of_two(grid(axis))) {
      throw UsageError("grid size must be a power of two >= 2, got " +
                       std::to_string(grid(axis)));
    }
  }
  if (max_len < 1) throw UsageError("max_len must be >= 1");
  if (!(bit_low < lambda && lambda < bit_high)) {
    throw UsageError("codec requires bit_low < lambda < bit_high");
  }
  if (!(bit_low < flag_threshold && flag_threshold < bit_high)) {
    throw UsageError("codec requires bit_low < flag_threshold < bit_high");
  }
}

int C2FConfig::bits(int axis) const {
  return std::countr_zero(static_cast<unsigned>(grid(axis)));
}

int C2FConfig::bit_column(int axis) const {
  int col = 1;
  for (int a = 0; a < axis; ++a) col += bits(a);
  return col;
}

std::vector<int> binary_encode(int g, int bits) {
  if (bits < 0 || bits > 30 || g < 0 || g >= (1 << bits)) {
    throw UsageError("binary_encode: index " + std::to_string(g) + " out of range for " +
                     std::to_string(bits) + " bits");
  }
  std::vector<int> out(static_cast<std::size_t>(bits));
  for (int k = 0; k < bits; ++k) out[static_cast<std::size_t>(k)] = (g >> (bits - 1 - k)) & 1;
  return out;
}

int binary_decode(const std::vector<int>& bits) {
  int g = 0;
  for (int b : bits) g = (g << 1) | (b ? 1 : 0);
  return g;
}

double cell_size(const Dims& dims, const C2FConfig& cfg, int axis) {
  return static_cast<double>(dims.axis(axis)) / static_cast<double>(cfg.grid(axis));
}

C2FElement encode_point(const Voxel& p, const Dims& dims, const C2FConfig& cfg) {
  if (!dims.contains(p)) {
    throw UsageError("point " + to_string(p) + " outside volume " + to_string(dims));
  }
  C2FElement e;
  e.flag = cfg.bit_high;
  e.bits.reserve(static_cast<std::size_t>(cfg.total_bits()));
  for (int axis = 0; axis < 3; ++axis) {
    const double s = cell_size(dims, cfg, axis);
    const int coord = axis_of(p, axis);
    int g = std::clamp(static_cast<int>(std::floor(coord / s)), 0, cfg.grid(axis) - 1);
    double offset = (coord - s * (g + 0.5)) / s;
    // floor(coord / s) can land one cell off when s is fractional.
    if (offset >= 0.5 && g + 1 < cfg.grid(axis)) {
      ++g;
      offset = (coord - s * (g + 0.5)) / s;
    } else if (offset < -0.5 && g > 0) {
      --g;
      offset = (coord - s * (g + 0.5)) / s;
    }
    e.cells[static_cast<std::size_t>(axis)] = g;
    e.offsets[static_cast<std::size_t>(axis)] = offset;
    for (int b : binary_encode(g, cfg.bits(axis))) {
      e.bits.push_back(b ? cfg.bit_high : cfg.bit_low);
    }
  }
  return e;
}

void write_row(const C2FElement& e, Mat& m, int row) {
  m(row, 0) = e.flag;
  for (std::size_t k = 0; k < e.bits.size(); ++k) m(row, 1 + static_cast<int>(k)) = e.bits[k];
  const int base = 1 + static_cast<int>(e.bits.size());
  for (int a = 0; a < 3; ++a) m(row, base + a) = e.offsets[static_cast<std::size_t>(a)];
}

C2FMatrix encode_centerline(const Centerline& c, const Dims& dims, const C2FConfig& cfg) {
  if (c.size() > static_cast<std::size_t>(cfg.max_len)) {
    throw UsageError("centerline has " + std::to_string(c.size()) +
                     " points but codec capacity L is " + std::to_string(cfg.max_len));
  }
  C2FMatrix out;
  out.values = Mat::Constant(cfg.max_len, cfg.width(), cfg.padding_value());
  int row = 0;
  for (const Voxel& p : c) write_row(encode_point(p, dims, cfg), out.values, row++);
  out.valid_rows = row;
  return out;
}

Centerline decode_matrix(const Mat& v, const Dims& dims, const C2FConfig& cfg) {
  std::vector<Voxel> points;
  if (v.cols() != cfg.width()) {
    throw UsageError("decode_matrix: width " + std::to_string(v.cols()) + " != codec width " +
                     std::to_string(cfg.width()));
  }
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (!v.row(r).allFinite()) continue;
    if (!(v(r, 0) > cfg.flag_threshold)) continue;
    std::array<int, 3> coord{};
    for (int axis = 0; axis < 3; ++axis) {
      int g = 0;
      const int first = cfg.bit_column(axis);
      for (int k = 0; k < cfg.bits(axis); ++k) g = (g << 1) | (v(r, first + k) > cfg.lambda ? 1 : 0);
      const double s = cell_size(dims, cfg, axis);
      const double real = s * (g + 0.5 + v(r, cfg.offset_column(axis)));
      const double hi = dims.axis(axis) - 1;
      coord[static_cast<std::size_t>(axis)] =
          static_cast<int>(std::clamp(std::round(real), 0.0, hi));
    }
    points.push_back({coord[0], coord[1], coord[2]});
  }
  return Centerline(std::move(points));
}

Mat RawCoordinateCodec::encode(const Centerline& c, const Dims& dims) const {
  if (c.size() > static_cast<std::size_t>(max_len)) {
    throw UsageError("centerline exceeds raw codec capacity");
  }
  Mat m = Mat::Constant(max_len, width(), bit_low);
  int row = 0;
  for (const Voxel& p : c) {
    if (!dims.contains(p)) throw UsageError("point " + to_string(p) + " outside volume");
    m(row, 0) = bit_high;
    for (int axis = 0; axis < 3; ++axis) {
      const double extent = std::max(1, dims.axis(axis) - 1);
      m(row, 1 + axis) = 2.0 * axis_of(p, axis) / extent - 1.0;
    }
    ++row;
  }
  return m;
}

Centerline RawCoordinateCodec::decode(const Mat& v, const Dims& dims) const {
  std::vector<Voxel> points;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (!v.row(r).allFinite() || !(v(r, 0) > flag_threshold)) continue;
    std::array<int, 3> coord{};
    for (int axis = 0; axis < 3; ++axis) {
      const double extent = std::max(1, dims.axis(axis) - 1);
      const double real = (v(r, 1 + axis) + 1.0) * 0.5 * extent;
      coord[static_cast<std::size_t>(axis)] =
          static_cast<int>(std::clamp(std::round(real), 0.0, static_cast<double>(dims.axis(axis) - 1)));
    }
    points.push_back({coord[0], coord[1], coord[2]});
  }
  return Centerline(std::move(points));
}

}  // namespace vf
