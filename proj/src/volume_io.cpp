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

#include "vesselfusion/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace vf {
namespace {

constexpr std::size_t kMaxHeaderBytes = 128;

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

bool parse_int(std::string_view token, int& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

Volume::Volume(Dims dims, std::vector<float> voxels) : dims_(dims), voxels_(std::move(voxels)) {
  if (!dims_.valid()) throw UsageError("volume dims must be >= 1, got " + to_string(dims_));
  if (voxels_.size() != dims_.count()) {
    throw UsageError("volume " + to_string(dims_) + " needs " + std::to_string(dims_.count()) +
                     " voxels, got " + std::to_string(voxels_.size()));
  }
  for (std::size_t i = 0; i < voxels_.size(); ++i) {
    if (!std::isfinite(voxels_[i])) {
      throw UsageError("non-finite voxel at linear index " + std::to_string(i));
    }
  }
}

Volume Volume::zeros(Dims dims) {
  if (!dims.valid()) throw UsageError("volume dims must be >= 1, got " + to_string(dims));
  return Volume(dims, std::vector<float>(dims.count(), 0.0f));
}

Centerline::Centerline(std::vector<Voxel> points) : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
}

bool Centerline::contains(const Voxel& v) const {
  return std::binary_search(points_.begin(), points_.end(), v);
}

bool Centerline::fits(const Dims& dims) const {
  return std::all_of(points_.begin(), points_.end(),
                     [&](const Voxel& p) { return dims.contains(p); });
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw UsageError("split ratios must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1, got " + std::to_string(train + val + test));
  }
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  const Dims& d = v.dims();
  const std::string header = "VOL " + std::to_string(d.x) + " " + std::to_string(d.y) + " " +
                             std::to_string(d.z) + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<std::uint32_t> payload(v.voxels().size());
  std::transform(v.voxels().begin(), v.voxels().end(), payload.begin(),
                 [](float f) { return to_little_endian(std::bit_cast<std::uint32_t>(f)); });
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(std::uint32_t)));
  if (!out) throw FormatError("write failed for " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open volume " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();

  const auto newline = std::find(bytes.begin(),
                                 bytes.begin() + std::min(bytes.size(), kMaxHeaderBytes), '\n');
  if (newline == bytes.end() || newline - bytes.begin() >= static_cast<long>(kMaxHeaderBytes)) {
    throw FormatError(where + ": missing header line terminator at byte offset 0");
  }
  const std::string_view header(bytes.data(), static_cast<std::size_t>(newline - bytes.begin()));
  const auto tokens = split_ws(header);
  if (tokens.size() != 4 || tokens[0] != "VOL") {
    throw FormatError(where + ": malformed header at byte offset 0, expected 'VOL <x> <y> <z>'");
  }
  Dims dims;
  if (!parse_int(tokens[1], dims.x) || !parse_int(tokens[2], dims.y) ||
      !parse_int(tokens[3], dims.z)) {
    throw FormatError(where + ": non-integer dims in header at byte offset 0");
  }
  if (!dims.valid()) {
    throw FormatError(where + ": invalid dims " + to_string(dims) + " at byte offset 0");
  }

  const std::size_t offset = static_cast<std::size_t>(newline - bytes.begin()) + 1;
  const std::size_t expected = dims.count() * sizeof(float);
  const std::size_t available = bytes.size() - offset;
  if (available < expected) {
    throw FormatError(where + ": truncated payload, expected " + std::to_string(expected) +
                      " bytes after header, file ends at byte offset " +
                      std::to_string(bytes.size()));
  }
  if (available > expected) {
    throw FormatError(where + ": trailing data at byte offset " +
                      std::to_string(offset + expected));
  }
  std::vector<float> voxels(dims.count());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + offset + 4 * i, 4);
    voxels[i] = std::bit_cast<float>(to_little_endian(raw));
    if (!std::isfinite(voxels[i])) {
      throw FormatError(where + ": non-finite voxel at byte offset " +
                        std::to_string(offset + 4 * i));
    }
  }
  return Volume(dims, std::move(voxels));
}

void save_centerline(const Centerline& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (const Voxel& p : c) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

Centerline load_centerline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open centerline " + path.string());
  std::vector<Voxel> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    Voxel p;
    if (tokens.size() != 3 || !parse_int(tokens[0], p.x) || !parse_int(tokens[1], p.y) ||
        !parse_int(tokens[2], p.z)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected three integers 'x y z'");
    }
    points.push_back(p);
  }
  return Centerline(std::move(points));
}

DatasetSplit split_dataset(std::size_t case_count, const SplitSpec& spec) {
  spec.validate();
  const int nonzero = (spec.train > 0) + (spec.val > 0) + (spec.test > 0);
  if (case_count < static_cast<std::size_t>(nonzero)) {
    throw UsageError("cannot split " + std::to_string(case_count) + " cases into " +
                     std::to_string(nonzero) + " non-empty splits");
  }
  std::vector<std::size_t> order(case_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = case_count; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const auto portion = [&](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(case_count) * ratio + 1e-9));
  };
  const std::size_t n_val = portion(spec.val);
  const std::size_t n_test = portion(spec.test);
  const std::size_t n_train = case_count - n_val - n_test;

  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  split.val.assign(order.begin() + static_cast<long>(n_train),
                   order.begin() + static_cast<long>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
  return split;
}

}  // namespace vf
