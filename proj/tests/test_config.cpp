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

#include "doctest.h"
#include "test_util.hpp"
#include "vesselfusion/config.hpp"

using namespace vf;
using vf::testing::TempDir;
using vf::testing::write_file;

TEST_CASE("defaults validate and map to the typed views") {
  const RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.tree().dims == Dims{32, 32, 32});
  CHECK(cfg.synth_cases() == 40);
  CHECK(cfg.codec().max_len == 64);
  CHECK(cfg.codec().grid_x == 8);
  CHECK(cfg.codec().padding == PaddingMode::kBitLow);
  CHECK(cfg.sampler().steps == 1000);
  CHECK(cfg.sampler().inference_steps == 100);
  CHECK(cfg.schedule().kind() == ScheduleKind::kCosine);
  CHECK(cfg.model().volume_dims == Dims{32, 32, 32});
  CHECK(cfg.model().codec.max_len == 64);
  CHECK(cfg.training().epochs == 200);
  CHECK(cfg.training().learning_rate == 0.002);
  CHECK(cfg.training().noise_draws == 8);
  CHECK_FALSE(cfg.model().skip_connection);
  CHECK(cfg.augment());
  CHECK(cfg.voting().samples == 10);
  CHECK_FALSE(cfg.voting().tau.has_value());
  CHECK(cfg.radii() == std::vector<double>{1, 2, 3});
  CHECK(cfg.connectivity() == Connectivity::k26);
  CHECK(cfg.sweep_k() == std::vector<int>{1, 5, 10});
}

TEST_CASE("file syntax, comments and overrides") {
  TempDir dir("cfg");
  write_file(dir / "c.txt", "# comment line\n\nK = 5   # trailing comment\ntau=3\nseed = 11\npadding = zero\n");
  const RunConfig cfg = RunConfig::load(dir / "c.txt");
  CHECK(cfg.voting().samples == 5);
  CHECK(cfg.voting().tau == 3);
  CHECK(cfg.voting().seed_base == 11);
  CHECK(cfg.sampler().seed == 11);
  CHECK(cfg.codec().padding == PaddingMode::kZero);
  CHECK(cfg.get("K") == "5");
}

TEST_CASE("echo round trips through a file") {
  TempDir dir("cfgecho");
  RunConfig cfg;
  cfg.set("hidden", "32");
  cfg.set("radii", "1,2.5");
  cfg.write(dir / "out.txt");
  const RunConfig back = RunConfig::load(dir / "out.txt");
  CHECK(back.echo() == cfg.echo());
  CHECK(back.radii() == std::vector<double>{1.0, 2.5});
  CHECK(cfg.echo().find("hidden = 32  # ") != std::string::npos);
}

TEST_CASE("errors name the key and line") {
  TempDir dir("cfgerr");
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("nope", "1"), UsageError);
  CHECK_FALSE(cfg.has("nope"));
  CHECK(cfg.has("K"));
  write_file(dir / "bad.txt", "K = 5\nbogus = 2\n");
  try {
    RunConfig::load(dir / "bad.txt");
    FAIL("expected an error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  write_file(dir / "noeq.txt", "K 5\n");
  CHECK_THROWS_AS(RunConfig::load(dir / "noeq.txt"), UsageError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.txt"), UsageError);

  const auto invalid = [](const char* key, const char* value) {
    RunConfig c;
    c.set(key, value);
    return c;
  };
  CHECK_THROWS_AS(invalid("K", "ten").validate(), UsageError);
  CHECK_THROWS_AS(invalid("K", "3.5").validate(), UsageError);
  CHECK_THROWS_AS(invalid("learning_rate", "fast").validate(), UsageError);
  CHECK_THROWS_AS(invalid("grid_x", "6").validate(), UsageError);
  CHECK_THROWS_AS(invalid("T_prime", "300").validate(), UsageError);
  CHECK_THROWS_AS(invalid("tau", "11").validate(), UsageError);
  CHECK_THROWS_AS(invalid("padding", "ones").validate(), UsageError);
  CHECK_THROWS_AS(invalid("connectivity", "18").validate(), UsageError);
  CHECK_THROWS_AS(invalid("lr_schedule", "step").validate(), UsageError);
  CHECK_THROWS_AS(invalid("augment", "2").validate(), UsageError);
  CHECK_THROWS_AS(invalid("sweep_k", "1,0").validate(), UsageError);
  CHECK_THROWS_AS(invalid("radii", "").validate(), UsageError);
  CHECK_THROWS_AS(invalid("split_train", "0.9").validate(), UsageError);
}

TEST_CASE("number lists") {
  CHECK(parse_double_list("1, 2 ,3.5") == std::vector<double>{1, 2, 3.5});
  CHECK(parse_int_list("10,5") == std::vector<int>{10, 5});
  CHECK_THROWS_AS(parse_int_list("1,x"), UsageError);
  CHECK_THROWS_AS(parse_double_list(""), UsageError);
}
