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

#include <vector>

#include "vesselfusion/volume_io.hpp"

namespace vf {

/// Parameters of the procedural vessel-tree generator.
struct TreeSpec {
  Dims dims{32, 32, 32};
  int depth = 3;              // max bifurcation depth
  double branch_prob = 0.6;   // chance a segment bifurcates
  int segment_min = 5;        // voxels per segment
  int segment_max = 12;
  double curl = 0.35;         // max direction perturbation per step, radians
  double branch_angle = 0.7;  // half-angle between bifurcating children, radians
  double inward_bias = 0.15;  // pull toward the volume centre
  double tube_radius = 1.5;
  double noise_sigma = 0.1;

  void validate() const;
};

/// Random branching walk rooted on one volume face. Every new voxel is
/// 26-adjacent to exactly one earlier voxel, so the result is a connected tree
/// (one component, no cycles) in the 26-adjacency graph.
Centerline generate_tree(const TreeSpec& spec, std::uint64_t seed);

/// 1 within tube_radius of any centerline voxel, 0 elsewhere, plus Gaussian
/// noise, clamped to [-0.5, 1.5].
Volume rasterize(const Centerline& tree, const TreeSpec& spec, std::uint64_t seed);

/// Cases "case_0000".. with seeds seed..seed+n-1. A tree larger than
/// max_points is regenerated with shorter segments, up to 10 times.
std::vector<DatasetCase> make_dataset(int n, const TreeSpec& spec, int max_points,
                                      std::uint64_t seed);

/// Number of grid symmetries: 48 axis permutations with flips for a cube,
/// otherwise the 8 flips.
int symmetry_count(const Dims& dims);

/// Symmetry index s in [0, symmetry_count): bits 0..2 flip x, y, z and
/// s / 8 selects the axis permutation. s = 0 is the identity.
Voxel apply_symmetry(const Voxel& v, const Dims& dims, int s);

/// Volume and centerline mapped by the same symmetry; the id is kept.
DatasetCase transform_case(const DatasetCase& c, int s);

}  // namespace vf
