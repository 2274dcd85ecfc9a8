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

#include <string>
#include <vector>

namespace vf {

struct PlotSeries {
  std::string label;
  std::vector<double> y;
  std::string color;
};

/// Line chart with a shared x axis, `left` scaled on the left axis and
/// `right` on the right axis. All series must have x.size() points.
std::string two_axis_svg(const std::string& title, const std::string& x_label,
                         const std::vector<double>& x, const PlotSeries& left,
                         const PlotSeries& right);

}  // namespace vf
