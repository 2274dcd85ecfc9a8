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

#include "vesselfusion/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vesselfusion/common.hpp"

namespace vf {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 70.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

struct Range {
  double lo;
  double hi;
};

Range padded_range(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string two_axis_svg(const std::string& title, const std::string& x_label,
                         const std::vector<double>& x, const PlotSeries& left,
                         const PlotSeries& right) {
  if (x.empty()) throw UsageError("plot needs at least one point");
  if (left.y.size() != x.size() || right.y.size() != x.size()) {
    throw UsageError("plot series length differs from x");
  }
  const Range rx = padded_range(x);
  const Range rl = padded_range(left.y);
  const Range rr = padded_range(right.y);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto sx = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * plot_w; };
  const auto sy = [&](double v, const Range& r) {
    return kTop + plot_h - (v - r.lo) / (r.hi - r.lo) * plot_h;
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << px(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  o << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(plot_w)
    << "\" height=\"" << px(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double f = static_cast<double>(i) / kTicks;
    const double y = kTop + plot_h - f * plot_h;
    o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(y) << "\" x2=\"" << px(kLeft + plot_w)
      << "\" y2=\"" << px(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\" fill=\""
      << left.color << "\">" << num(rl.lo + f * (rl.hi - rl.lo)) << "</text>\n";
    o << "<text x=\"" << px(kLeft + plot_w + 6) << "\" y=\"" << px(y + 4) << "\" fill=\"" << right.color
      << "\">" << num(rr.lo + f * (rr.hi - rr.lo)) << "</text>\n";
  }
  for (double v : x) {
    o << "<text x=\"" << px(sx(v)) << "\" y=\"" << px(kTop + plot_h + 18)
      << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  o << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"" << px(kHeight - 16)
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << px(kTop + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\" fill=\""
    << left.color << "\">" << escape(left.label) << "</text>\n";
  o << "<text transform=\"translate(" << px(kWidth - 14) << ',' << px(kTop + plot_h / 2)
    << ") rotate(90)\" text-anchor=\"middle\" fill=\"" << right.color << "\">" << escape(right.label)
    << "</text>\n";

  const auto line = [&](const PlotSeries& s, const Range& r) {
    o << "<path fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" d=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      o << (i == 0 ? 'M' : 'L') << px(sx(x[i])) << ',' << px(sy(s.y[i], r)) << ' ';
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
      o << "<circle cx=\"" << px(sx(x[i])) << "\" cy=\"" << px(sy(s.y[i], r)) << "\" r=\"3.5\" fill=\""
        << s.color << "\"/>\n";
    }
  };
  line(left, rl);
  line(right, rr);
  o << "</svg>\n";
  return o.str();
}

}  // namespace vf
