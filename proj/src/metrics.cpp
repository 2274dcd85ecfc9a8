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

#include "vesselfusion/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace vf {
namespace {

struct VoxelHash {
  std::size_t operator()(const Voxel& v) const {
    const auto u = [](int c) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)); };
    return static_cast<std::size_t>(mix_seed((u(v.x) << 42) ^ (u(v.y) << 21) ^ u(v.z)));
  }
};

using VoxelSet = std::unordered_set<Voxel, VoxelHash>;

/// Number of points in `from` with a point of `to` within radius.
std::size_t count_matched(const Centerline& from, const Centerline& to, double radius) {
  if (from.empty() || to.empty()) return 0;
  const int reach = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  const double cube = std::pow(2.0 * reach + 1.0, 3.0);
  std::size_t matched = 0;
  if (cube > static_cast<double>(to.size())) {
    for (const Voxel& p : from) {
      for (const Voxel& q : to) {
        const double dx = p.x - q.x;
        const double dy = p.y - q.y;
        const double dz = p.z - q.z;
        if (dx * dx + dy * dy + dz * dz <= r2) {
          ++matched;
          break;
        }
      }
    }
    return matched;
  }
  const VoxelSet lookup(to.begin(), to.end());
  for (const Voxel& p : from) {
    bool hit = false;
    for (int dz = -reach; dz <= reach && !hit; ++dz) {
      for (int dy = -reach; dy <= reach && !hit; ++dy) {
        for (int dx = -reach; dx <= reach && !hit; ++dx) {
          if (dx * dx + dy * dy + dz * dz > r2) continue;
          hit = lookup.count({p.x + dx, p.y + dy, p.z + dz}) > 0;
        }
      }
    }
    matched += hit ? 1 : 0;
  }
  return matched;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

MatchReport precision_recall(const Centerline& pred, const Centerline& gt, double radius) {
  if (!(radius >= 0.0)) throw UsageError("radius must be >= 0");
  MatchReport r;
  r.radius = radius;
  r.tp_pred = count_matched(pred, gt, radius);
  r.fp = pred.size() - r.tp_pred;
  r.tp_gt = count_matched(gt, pred, radius);
  r.fn = gt.size() - r.tp_gt;
  r.degenerate_pred = pred.empty();
  r.degenerate_gt = gt.empty();
  r.precision = pred.empty() ? 0.0 : static_cast<double>(r.tp_pred) / pred.size();
  r.recall = gt.empty() ? 0.0 : static_cast<double>(r.tp_gt) / gt.size();
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

BettiReport betti_numbers(const Centerline& points, Connectivity conn) {
  BettiReport b;
  const auto& pts = points.points();
  b.vertices = static_cast<long>(pts.size());
  if (pts.empty()) return b;
  std::unordered_map<Voxel, std::size_t, VoxelHash> index;
  index.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) index.emplace(pts[i], i);
  std::vector<std::size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  long components = static_cast<long>(pts.size());

  // Visit each undirected neighbour pair once via the lexicographically larger offsets.
  std::vector<Voxel> forward;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const Voxel off{dx, dy, dz};
        if (!(Voxel{0, 0, 0} < off)) continue;
        if (conn == Connectivity::k6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1) continue;
        forward.push_back(off);
      }
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (const Voxel& off : forward) {
      const auto it = index.find({pts[i].x + off.x, pts[i].y + off.y, pts[i].z + off.z});
      if (it == index.end()) continue;
      ++b.edges;
      const std::size_t a = find_root(parent, i);
      const std::size_t c = find_root(parent, it->second);
      if (a != c) {
        parent[a] = c;
        --components;
      }
    }
  }
  b.betti0 = components;
  b.betti1 = b.edges - b.vertices + components;
  return b;
}

CaseReport evaluate_case(const std::string& case_id, const Centerline& pred, const Centerline& gt,
                         const std::vector<double>& radii, Connectivity conn) {
  if (radii.empty()) throw UsageError("evaluate_case: at least one radius required");
  CaseReport r;
  r.case_id = case_id;
  for (double radius : radii) r.matches.push_back(precision_recall(pred, gt, radius));
  r.betti = betti_numbers(pred, conn);
  return r;
}

std::vector<MeanRow> mean_rows(const std::vector<CaseReport>& reports) {
  std::vector<MeanRow> rows;
  if (reports.empty()) return rows;
  const std::size_t nr = reports.front().matches.size();
  const double n = static_cast<double>(reports.size());
  for (std::size_t j = 0; j < nr; ++j) {
    MeanRow m;
    m.radius = reports.front().matches[j].radius;
    for (const auto& c : reports) {
      if (c.matches.size() != nr) throw UsageError("mean_rows: inconsistent radius lists");
      m.precision += c.matches[j].precision / n;
      m.recall += c.matches[j].recall / n;
      m.f1 += c.matches[j].f1 / n;
      m.betti0 += static_cast<double>(c.betti.betti0) / n;
      m.betti1 += static_cast<double>(c.betti.betti1) / n;
    }
    rows.push_back(m);
  }
  return rows;
}

void write_metrics_csv(const std::vector<CaseReport>& reports, std::ostream& out) {
  out << "case_id,R,precision,recall,f1,betti0,betti1\n";
  for (const auto& c : reports) {
    for (const auto& m : c.matches) {
      out << c.case_id << ',' << fmt(m.radius) << ',' << fmt(m.precision) << ',' << fmt(m.recall)
          << ',' << fmt(m.f1) << ',' << c.betti.betti0 << ',' << c.betti.betti1 << '\n';
    }
  }
  for (const auto& m : mean_rows(reports)) {
    out << "mean," << fmt(m.radius) << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ','
        << fmt(m.f1) << ',' << fmt(m.betti0) << ',' << fmt(m.betti1) << '\n';
  }
}

void write_metrics_csv(const std::vector<CaseReport>& reports, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_metrics_csv(reports, out);
}

}  // namespace vf
