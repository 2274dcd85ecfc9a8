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

#include <cstring>
#include <limits>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"
#include "vesselfusion/volume_io.hpp"

using namespace vf;
using vf::testing::read_file;
using vf::testing::TempDir;
using vf::testing::write_file;

namespace {

std::string volume_bytes(const std::string& header, const std::vector<float>& values) {
  std::string out = header;
  for (float v : values) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    out.append(reinterpret_cast<const char*>(b), 4);
  }
  return out;
}

Volume random_volume(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(d.count());
  for (float& x : v) x = static_cast<float>(rng.normal());
  return Volume(d, std::move(v));
}

}  // namespace

TEST_CASE("volume rejects invalid dims, lengths and non-finite values") {
  CHECK_THROWS_AS(Volume({0, 1, 1}, {}), UsageError);
  CHECK_THROWS_AS(Volume({2, 2, 2}, std::vector<float>(7, 0.0f)), UsageError);
  CHECK_THROWS_AS(Volume({1, 1, 1}, {std::numeric_limits<float>::quiet_NaN()}), UsageError);
  CHECK_THROWS_AS(Volume({1, 1, 1}, {std::numeric_limits<float>::infinity()}), UsageError);
  const Volume v({2, 3, 4}, std::vector<float>(24, 1.5f));
  CHECK(v.at(1, 2, 3) == 1.5f);
}

TEST_CASE("voxel index is x fastest") {
  const Dims d{3, 4, 5};
  CHECK(d.index({1, 0, 0}) == 1);
  CHECK(d.index({0, 1, 0}) == 3);
  CHECK(d.index({0, 0, 1}) == 12);
  CHECK(d.index({2, 3, 4}) == 2 + 3 * (3 + 4 * 4));
}

TEST_CASE("smallest volume file is header plus one float") {
  TempDir dir("vol");
  save_volume(Volume::zeros({1, 1, 1}), dir / "a.vol");
  const std::string bytes = read_file(dir / "a.vol");
  // "VOL 1 1 1\n" is ten bytes, followed by four zero bytes.
  CHECK(bytes.size() == 14);
  CHECK(bytes.substr(0, 10) == "VOL 1 1 1\n");
  CHECK(bytes.substr(10) == std::string(4, '\0'));
}

TEST_CASE("volume payload is little-endian float32 in x-fastest order") {
  TempDir dir("vol");
  const Volume v({2, 1, 1}, {1.0f, -2.0f});
  save_volume(v, dir / "a.vol");
  CHECK(read_file(dir / "a.vol") == volume_bytes("VOL 2 1 1\n", {1.0f, -2.0f}));
}

TEST_CASE("volume save/load round trip is bit exact") {
  TempDir dir("vol");
  for (Dims d : {Dims{1, 1, 1}, Dims{3, 5, 2}, Dims{32, 32, 32}}) {
    const Volume v = random_volume(d, 11);
    save_volume(v, dir / "r.vol");
    const Volume back = load_volume(dir / "r.vol");
    REQUIRE(back.dims() == d);
    const auto a = v.voxels();
    const auto b = back.voxels();
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("load_volume reports malformed files") {
  TempDir dir("vol");
  SUBCASE("truncated payload") {
    write_file(dir / "t.vol", volume_bytes("VOL 2 2 2\n", std::vector<float>(7, 0.0f)));
    CHECK_THROWS_WITH_AS(load_volume(dir / "t.vol"), doctest::Contains("truncated"), FormatError);
  }
  SUBCASE("zero dim") {
    write_file(dir / "z.vol", volume_bytes("VOL 0 1 1\n", {}));
    CHECK_THROWS_WITH_AS(load_volume(dir / "z.vol"), doctest::Contains("dims"), FormatError);
  }
  SUBCASE("bad magic") {
    write_file(dir / "m.vol", volume_bytes("VOX 1 1 1\n", {0.0f}));
    CHECK_THROWS_WITH_AS(load_volume(dir / "m.vol"), doctest::Contains("byte offset"), FormatError);
  }
  SUBCASE("NaN voxel names its byte offset") {
    write_file(dir / "n.vol",
               volume_bytes("VOL 2 1 1\n", {0.0f, std::numeric_limits<float>::quiet_NaN()}));
    CHECK_THROWS_WITH_AS(load_volume(dir / "n.vol"), doctest::Contains("byte offset 14"), FormatError);
  }
  SUBCASE("trailing bytes") {
    write_file(dir / "x.vol", volume_bytes("VOL 1 1 1\n", {0.0f, 0.0f}));
    CHECK_THROWS_AS(load_volume(dir / "x.vol"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_volume(dir / "none.vol"), FormatError); }
}

TEST_CASE("centerline file format") {
  TempDir dir("cl");
  save_centerline(Centerline({{1, 2, 3}}), dir / "c.txt");
  CHECK(read_file(dir / "c.txt") == "1 2 3\n");

  save_centerline(Centerline({{2, 0, 0}, {0, 5, 1}, {0, 5, 0}}), dir / "s.txt");
  CHECK(read_file(dir / "s.txt") == "0 5 0\n0 5 1\n2 0 0\n");
}

TEST_CASE("centerline loader deduplicates and validates") {
  TempDir dir("cl");
  write_file(dir / "d.txt", "1 2 3\n1 2 3\n4 5 6\n");
  const Centerline c = load_centerline(dir / "d.txt");
  CHECK(c.size() == 2);
  CHECK(c.contains({1, 2, 3}));

  write_file(dir / "bad.txt", "1 2 3\n4 x 6\n");
  CHECK_THROWS_WITH_AS(load_centerline(dir / "bad.txt"), doctest::Contains(":2:"), FormatError);
  write_file(dir / "frac.txt", "1 2 3.5\n");
  CHECK_THROWS_AS(load_centerline(dir / "frac.txt"), FormatError);
  write_file(dir / "short.txt", "1 2\n");
  CHECK_THROWS_AS(load_centerline(dir / "short.txt"), FormatError);
  write_file(dir / "empty.txt", "");
  CHECK(load_centerline(dir / "empty.txt").empty());
}

TEST_CASE("500 random points round trip as a set") {
  TempDir dir("cl");
  Rng rng(5);
  std::vector<Voxel> pts;
  std::set<Voxel> expected;
  for (int i = 0; i < 500; ++i) {
    const Voxel v{rng.uniform_int(0, 99), rng.uniform_int(0, 99), rng.uniform_int(0, 99)};
    pts.push_back(v);
    expected.insert(v);
  }
  save_centerline(Centerline(pts), dir / "r.txt");
  const Centerline back = load_centerline(dir / "r.txt");
  CHECK(std::set<Voxel>(back.begin(), back.end()) == expected);
}

TEST_CASE("split sizes follow floor ratios with remainder to train") {
  const DatasetSplit s = split_dataset(10, SplitSpec{0.7, 0.1, 0.2, 0});
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);

  const DatasetSplit all = split_dataset(3, SplitSpec{1.0, 0.0, 0.0, 0});
  CHECK(all.train.size() == 3);
  CHECK(all.val.empty());
  CHECK(all.test.empty());

  const DatasetSplit forty = split_dataset(40, SplitSpec{0.7, 0.1, 0.2, 0});
  CHECK(forty.train.size() == 28);
  CHECK(forty.val.size() == 4);
  CHECK(forty.test.size() == 8);
}

TEST_CASE("split is a deterministic partition") {
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const SplitSpec spec{0.6, 0.2, 0.2, seed};
    const DatasetSplit a = split_dataset(23, spec);
    const DatasetSplit b = split_dataset(23, spec);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    std::multiset<std::size_t> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 23);
    CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 23);
    CHECK(*all.rbegin() == 22);
  }
  CHECK(split_dataset(23, SplitSpec{0.6, 0.2, 0.2, 1}).train !=
        split_dataset(23, SplitSpec{0.6, 0.2, 0.2, 2}).train);
}

TEST_CASE("split rejects bad specs") {
  CHECK_THROWS_AS(split_dataset(2, SplitSpec{0.7, 0.1, 0.2, 0}), UsageError);
  CHECK_THROWS_AS(split_dataset(10, SplitSpec{0.7, 0.1, 0.1, 0}), UsageError);
  CHECK_THROWS_AS(split_dataset(10, SplitSpec{1.2, -0.2, 0.0, 0}), UsageError);
}
