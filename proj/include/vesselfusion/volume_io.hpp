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

// On-disk formats
//
//   Volume:     "VOL <V_x> <V_y> <V_z>\n" followed by V_x*V_y*V_z little-endian
//               float32 values, x fastest (index = x + V_x * (y + V_y * z)).
//   Centerline: plain text, one "x y z" integer triple per line, written in
//               lexicographic order.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vesselfusion/common.hpp"

namespace vf {

/// Dense scalar grid. Immutable once constructed.
class Volume {
 public:
  Volume() = default;
  /// Throws UsageError on invalid dims, wrong length or non-finite values.
  Volume(Dims dims, std::vector<float> voxels);

  static Volume zeros(Dims dims);

  const Dims& dims() const { return dims_; }
  std::span<const float> voxels() const { return voxels_; }
  float at(int x, int y, int z) const { return voxels_[dims_.index({x, y, z})]; }
  float at(const Voxel& v) const { return voxels_[dims_.index(v)]; }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  std::vector<float> voxels_ = {0.0f};
};

/// Finite set of voxel coordinates, kept sorted and unique.
class Centerline {
 public:
  Centerline() = default;
  explicit Centerline(std::vector<Voxel> points);

  const std::vector<Voxel>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  bool contains(const Voxel& v) const;
  /// True when every point lies inside dims.
  bool fits(const Dims& dims) const;

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool operator==(const Centerline&) const = default;

 private:
  std::vector<Voxel> points_;
};

struct DatasetCase {
  std::string id;
  Volume volume;
  Centerline centerline;
};

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Indices into the case list passed to split_dataset.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

void save_centerline(const Centerline& c, const std::filesystem::path& path);
Centerline load_centerline(const std::filesystem::path& path);

/// Seeded shuffle, then val and test take floor(N * ratio) cases each and
/// train takes the remainder.
DatasetSplit split_dataset(std::size_t case_count, const SplitSpec& spec);

template <typename Case>
DatasetSplit split_dataset(const std::vector<Case>& cases, const SplitSpec& spec) {
  return split_dataset(cases.size(), spec);
}

}  // namespace vf
