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

// Slow, independent reference implementations used as test oracles.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <set>
#include <vector>

#include "vesselfusion/common.hpp"
#include "vesselfusion/volume_io.hpp"

namespace vf::oracle {

inline Centerline random_centerline(Rng& rng, const Dims& dims, int max_points) {
  const int n = rng.uniform_int(0, max_points);
  std::vector<Voxel> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({rng.uniform_int(0, dims.x - 1), rng.uniform_int(0, dims.y - 1),
                   rng.uniform_int(0, dims.z - 1)});
  }
  return Centerline(std::move(pts));
}

/// Random points clustered in a small box so nearby matches are common.
inline Centerline clustered_centerline(Rng& rng, int n, int extent) {
  std::vector<Voxel> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({rng.uniform_int(0, extent), rng.uniform_int(0, extent), rng.uniform_int(0, extent)});
  }
  return Centerline(std::move(pts));
}

/// Value of MSB-first bits by positional notation.
inline int positional_value(const std::vector<int>& bits) {
  int value = 0;
  const int b = static_cast<int>(bits.size());
  for (int k = 1; k <= b; ++k) value += bits[static_cast<std::size_t>(k - 1)] << (b - k);
  return value;
}

struct BruteMatch {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline bool within(const Voxel& a, const Voxel& b, double radius) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz <= radius * radius;
}

inline BruteMatch brute_precision_recall(const Centerline& pred, const Centerline& gt, double radius) {
  std::size_t tp_pred = 0;
  for (const Voxel& p : pred) {
    for (const Voxel& g : gt) {
      if (within(p, g, radius)) {
        ++tp_pred;
        break;
      }
    }
  }
  std::size_t tp_gt = 0;
  for (const Voxel& g : gt) {
    for (const Voxel& p : pred) {
      if (within(g, p, radius)) {
        ++tp_gt;
        break;
      }
    }
  }
  BruteMatch m;
  m.precision = pred.empty() ? 0.0 : static_cast<double>(tp_pred) / static_cast<double>(pred.size());
  m.recall = gt.empty() ? 0.0 : static_cast<double>(tp_gt) / static_cast<double>(gt.size());
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

inline bool adjacent26(const Voxel& a, const Voxel& b) {
  const int dx = std::abs(a.x - b.x);
  const int dy = std::abs(a.y - b.y);
  const int dz = std::abs(a.z - b.z);
  return std::max({dx, dy, dz}) == 1;
}

struct BruteGraph {
  long vertices = 0;
  long edges = 0;
  long components = 0;
};

/// Pairwise edge enumeration and depth-first component labelling.
inline BruteGraph brute_graph(const Centerline& c) {
  const auto& p = c.points();
  BruteGraph g;
  g.vertices = static_cast<long>(p.size());
  std::vector<std::vector<std::size_t>> adj(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      if (adjacent26(p[i], p[j])) {
        ++g.edges;
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  std::vector<bool> seen(p.size(), false);
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (seen[s]) continue;
    ++g.components;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return g;
}

/// Number of samples that contain v, by linear search in each.
inline int brute_count(const std::vector<Centerline>& samples, const Voxel& v) {
  int n = 0;
  for (const auto& s : samples) {
    n += std::find(s.begin(), s.end(), v) != s.end() ? 1 : 0;
  }
  return n;
}

inline std::set<Voxel> brute_threshold(const std::vector<Centerline>& samples, int tau) {
  std::set<Voxel> all;
  for (const auto& s : samples) all.insert(s.begin(), s.end());
  std::set<Voxel> out;
  for (const Voxel& v : all) {
    if (brute_count(samples, v) >= tau) out.insert(v);
  }
  return out;
}

/// Exhaustive argmin over tau of |mean size - |vote^tau||, first minimum wins.
inline int brute_auto_tau(const std::vector<Centerline>& samples) {
  double mean = 0.0;
  for (const auto& s : samples) mean += static_cast<double>(s.size());
  mean /= static_cast<double>(samples.size());
  int best = 1;
  double best_gap = -1.0;
  for (int tau = 1; tau <= static_cast<int>(samples.size()); ++tau) {
    const double gap = std::abs(mean - static_cast<double>(brute_threshold(samples, tau).size()));
    if (best_gap < 0.0 || gap < best_gap) {
      best_gap = gap;
      best = tau;
    }
  }
  return best;
}

}  // namespace vf::oracle
