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

#include "vesselfusion/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numbers>
#include <optional>
#include <set>

namespace vf {
namespace {

using Vec3 = std::array<double, 3>;

Vec3 add(const Vec3& a, const Vec3& b, double s = 1.0) {
  return {a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot(a, a));
  if (n < 1e-12) return {1.0, 0.0, 0.0};
  return {a[0] / n, a[1] / n, a[2] / n};
}
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 random_unit(Rng& rng) {
  return normalized({rng.normal(), rng.normal(), rng.normal()});
}

/// Rotates dir by angle about a random axis perpendicular to it.
Vec3 tilt(const Vec3& dir, double angle, Rng& rng) {
  Vec3 axis = cross(dir, random_unit(rng));
  axis = normalized(axis);
  const Vec3 side = cross(axis, dir);
  return normalized(add({dir[0] * std::cos(angle), dir[1] * std::cos(angle), dir[2] * std::cos(angle)},
                        side, std::sin(angle)));
}

struct Grower {
  const TreeSpec& spec;
  Rng& rng;
  std::set<Voxel> tree;

  bool inside(const Voxel& v) const { return spec.dims.contains(v); }

  /// A voxel may join when its only occupied neighbour is the current tip.
  bool attachable(const Voxel& cand, const Voxel& tip) const {
    if (!inside(cand) || tree.count(cand)) return false;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const Voxel n{cand.x + dx, cand.y + dy, cand.z + dz};
          if (n != tip && tree.count(n)) return false;
        }
      }
    }
    return true;
  }

  /// Walks up to len voxels from tip; returns the final tip and heading.
  std::pair<Voxel, Vec3> trace(Voxel tip, Vec3 dir, int len) {
    const Vec3 centre{0.5 * (spec.dims.x - 1), 0.5 * (spec.dims.y - 1), 0.5 * (spec.dims.z - 1)};
    for (int step = 0; step < len; ++step) {
      dir = tilt(dir, spec.curl * rng.uniform(), rng);
      const Vec3 here{static_cast<double>(tip.x), static_cast<double>(tip.y), static_cast<double>(tip.z)};
      dir = normalized(add(dir, normalized(add(centre, here, -1.0)), spec.inward_bias));
      double best_score = 0.3;
      std::optional<Voxel> best;
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const Voxel cand{tip.x + dx, tip.y + dy, tip.z + dz};
            const double score = dot(normalized({double(dx), double(dy), double(dz)}), dir);
            if (score > best_score && attachable(cand, tip)) {
              best_score = score;
              best = cand;
            }
          }
        }
      }
      if (!best) break;
      tree.insert(*best);
      tip = *best;
    }
    return {tip, dir};
  }
};

}  // namespace

void TreeSpec::validate() const {
  if (!dims.valid()) throw UsageError("tree dims must be >= 1");
  if (depth < 0) throw UsageError("tree depth must be >= 0");
  if (!(branch_prob >= 0.0 && branch_prob <= 1.0)) throw UsageError("branch_prob must be in [0,1]");
  if (segment_min > segment_max) throw UsageError("segment_min must be <= segment_max");
  if (segment_max < 1) throw UsageError("degenerate tree spec: segments have zero length");
  if (segment_min < 0) throw UsageError("segment_min must be >= 0");
  if (!(tube_radius >= 0.0)) throw UsageError("tube_radius must be >= 0");
  if (!(noise_sigma >= 0.0)) throw UsageError("noise_sigma must be >= 0");
  if (!(curl >= 0.0)) throw UsageError("curl must be >= 0");
}

Centerline generate_tree(const TreeSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x7EE));
  Grower grower{spec, rng, {}};

  const int face = rng.uniform_int(0, 5);
  const int axis = face / 2;
  const bool far_side = face % 2 == 1;
  std::array<int, 3> root{};
  Vec3 inward{0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    const int extent = spec.dims.axis(a);
    if (a == axis) {
      root[static_cast<std::size_t>(a)] = far_side ? extent - 1 : 0;
      inward[static_cast<std::size_t>(a)] = far_side ? -1.0 : 1.0;
    } else {
      root[static_cast<std::size_t>(a)] = rng.uniform_int(extent / 4, std::max(extent / 4, (3 * extent) / 4 - 1));
    }
  }
  const Voxel root_voxel{root[0], root[1], root[2]};
  grower.tree.insert(root_voxel);

  struct Pending {
    Voxel tip;
    Vec3 dir;
    int depth;
  };
  std::deque<Pending> queue{{root_voxel, tilt(inward, 0.3 * rng.uniform(), rng), 0}};
  while (!queue.empty()) {
    const Pending seg = queue.front();
    queue.pop_front();
    const int len = rng.uniform_int(std::max(1, spec.segment_min), spec.segment_max);
    const std::size_t before = grower.tree.size();
    const auto [tip, dir] = grower.trace(seg.tip, seg.dir, len);
    if (grower.tree.size() == before) continue;
    if (seg.depth < spec.depth && rng.uniform() < spec.branch_prob) {
      queue.push_back({tip, tilt(dir, spec.branch_angle, rng), seg.depth + 1});
      queue.push_back({tip, tilt(dir, spec.branch_angle, rng), seg.depth + 1});
    }
  }
  if (grower.tree.size() < 2) {
    throw UsageError("degenerate tree spec: no segment could be traced inside " + to_string(spec.dims));
  }
  return Centerline(std::vector<Voxel>(grower.tree.begin(), grower.tree.end()));
}

Volume rasterize(const Centerline& tree, const TreeSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Dims& d = spec.dims;
  std::vector<float> voxels(d.count(), 0.0f);
  const int reach = static_cast<int>(std::floor(spec.tube_radius));
  const double r2 = spec.tube_radius * spec.tube_radius;
  for (const Voxel& c : tree) {
    if (!d.contains(c)) throw UsageError("rasterize: point " + to_string(c) + " outside volume");
    for (int dz = -reach; dz <= reach; ++dz) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          if (dx * dx + dy * dy + dz * dz > r2) continue;
          const Voxel q{c.x + dx, c.y + dy, c.z + dz};
          if (d.contains(q)) voxels[d.index(q)] = 1.0f;
        }
      }
    }
  }
  if (spec.noise_sigma > 0.0) {
    Rng rng(mix_seed(seed, 0x5A5A));
    for (float& v : voxels) {
      const double noisy = v + spec.noise_sigma * rng.normal();
      v = static_cast<float>(std::clamp(noisy, -0.5, 1.5));
    }
  }
  return Volume(d, std::move(voxels));
}

std::vector<DatasetCase> make_dataset(int n, const TreeSpec& spec, int max_points,
                                      std::uint64_t seed) {
  if (n < 1) throw UsageError("make_dataset: need n >= 1 cases");
  std::vector<DatasetCase> cases;
  cases.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t case_seed = seed + static_cast<std::uint64_t>(i);
    TreeSpec attempt = spec;
    Centerline tree = generate_tree(attempt, case_seed);
    int retries = 0;
    while (tree.size() > static_cast<std::size_t>(max_points)) {
      if (++retries > 10) {
        throw UsageError("case " + std::to_string(i) + ": tree has " + std::to_string(tree.size()) +
                         " points after 10 retries; increase max_len (L=" + std::to_string(max_points) + ")");
      }
      attempt.segment_max = std::max(1, static_cast<int>(attempt.segment_max * 0.8));
      attempt.segment_min = std::min(attempt.segment_min, attempt.segment_max);
      tree = generate_tree(attempt, case_seed);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "case_%04d", i);
    Volume volume = rasterize(tree, spec, case_seed);
    cases.push_back({id, std::move(volume), std::move(tree)});
  }
  return cases;
}

int symmetry_count(const Dims& dims) {
  return dims.x == dims.y && dims.y == dims.z ? 48 : 8;
}

Voxel apply_symmetry(const Voxel& v, const Dims& dims, int s) {
  if (s < 0 || s >= symmetry_count(dims)) {
    throw UsageError("symmetry index " + std::to_string(s) + " out of range for " + to_string(dims));
  }
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  const std::array<int, 3> in{v.x, v.y, v.z};
  const auto& perm = kPerms[static_cast<std::size_t>(s / 8)];
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) {
    int c = in[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
    if ((s >> a) & 1) c = dims.axis(a) - 1 - c;
    out[static_cast<std::size_t>(a)] = c;
  }
  return {out[0], out[1], out[2]};
}

DatasetCase transform_case(const DatasetCase& c, int s) {
  const Dims& d = c.volume.dims();
  std::vector<float> voxels(d.count(), 0.0f);
  for (int z = 0; z < d.z; ++z) {
    for (int y = 0; y < d.y; ++y) {
      for (int x = 0; x < d.x; ++x) {
        voxels[d.index(apply_symmetry({x, y, z}, d, s))] = c.volume.at(x, y, z);
      }
    }
  }
  std::vector<Voxel> points;
  points.reserve(c.centerline.size());
  for (const Voxel& p : c.centerline) points.push_back(apply_symmetry(p, d, s));
  return {c.id, Volume(d, std::move(voxels)), Centerline(std::move(points))};
}

}  // namespace vf
