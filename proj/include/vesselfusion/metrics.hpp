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

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vesselfusion/volume_io.hpp"

namespace vf {

struct MatchReport {
  double radius = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp_pred = 0;
  std::size_t fp = 0;
  std::size_t tp_gt = 0;
  std::size_t fn = 0;
  bool degenerate_pred = false;  // empty prediction, precision reported as 0
  bool degenerate_gt = false;    // empty ground truth, recall reported as 0
};

struct BettiReport {
  long betti0 = 0;
  long betti1 = 0;
  long vertices = 0;
  long edges = 0;
};

enum class Connectivity { k6 = 6, k26 = 26 };

/// Directional matching with Euclidean distance <= radius (inclusive).
MatchReport precision_recall(const Centerline& pred, const Centerline& gt, double radius);

/// Components and cycle rank E - V + C of the voxel adjacency graph.
BettiReport betti_numbers(const Centerline& points, Connectivity conn = Connectivity::k26);

struct CaseReport {
  std::string case_id;
  std::vector<MatchReport> matches;  // one per radius
  BettiReport betti;
};

CaseReport evaluate_case(const std::string& case_id, const Centerline& pred, const Centerline& gt,
                         const std::vector<double>& radii,
                         Connectivity conn = Connectivity::k26);

/// Header, one row per (case, radius), then one "mean" row per radius.
void write_metrics_csv(const std::vector<CaseReport>& reports, std::ostream& out);
void write_metrics_csv(const std::vector<CaseReport>& reports, const std::filesystem::path& path);

struct MeanRow {
  double radius = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double betti0 = 0.0;
  double betti1 = 0.0;
};

/// Per-radius means over cases.
std::vector<MeanRow> mean_rows(const std::vector<CaseReport>& reports);

}  // namespace vf
