// Copyright 2026 The mmctl Authors.
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

#include <doctest.h>

#include <filesystem>
#include <string>

#include "mmctl/config.hpp"
#include "mmctl/model.hpp"
#include "test_util.hpp"

using namespace mmctl;
using namespace mmctl::testing;

namespace {

int error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const FormatError& e) {
    return e.line();
  }
  return -1;
}

bool rejected(const ScenarioConfig& cfg) {
  try {
    cfg.validate(default_model().dof());
  } catch (const ContractError&) {
    return true;
  }
  return false;
}

}  // namespace

TEST_CASE("every shipped config parses, validates and round-trips") {
  int seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(source_path("configs"))) {
    if (e.path().extension() != ".yaml") continue;
    INFO(e.path().string());
    const ScenarioConfig cfg = load_scenario(e.path().string());
    CHECK_NOTHROW(cfg.validate(default_model().dof()));
    const std::string once = dump_scenario(cfg);
    const ScenarioConfig again = parse_scenario(once);
    CHECK(dump_scenario(again) == once);
    ++seen;
  }
  CHECK(seen >= 5);
}

TEST_CASE("task defaults round-trip through a dump") {
  for (int id = 1; id <= 5; ++id) {
    const ScenarioConfig cfg = task_defaults(id);
    const std::string once = dump_scenario(cfg);
    CHECK(dump_scenario(parse_scenario(once)) == once);
  }
  for (BenchCondition c : kAllConditions) {
    const std::string once = dump_scenario(bench_defaults(c));
    CHECK(dump_scenario(parse_scenario(once)) == once);
  }
}

TEST_CASE("the explicit task 4 file equals the task 4 defaults") {
  ScenarioConfig file = load_scenario(source_path("configs/task4.yaml"));
  ScenarioConfig def = task_defaults(4);
  file.name = def.name;
  file.out = def.out;
  CHECK(dump_scenario(file) == dump_scenario(def));
}

TEST_CASE("overlay keeps defaults for keys not given") {
  const ScenarioConfig cfg = parse_scenario("task: {id: 3}\nseed: 42\n");
  const ScenarioConfig def = task_defaults(3);
  CHECK(cfg.seed == 42);
  CHECK(cfg.trials == def.trials);
  CHECK(cfg.plant.surface);
  REQUIRE(cfg.controllets.size() == def.controllets.size());
  CHECK(cfg.controllets[0].type == def.controllets[0].type);
}

TEST_CASE("benchmark conditions set the avoidance flags") {
  CHECK_FALSE(bench_defaults(BenchCondition::kNF).controllets[0].collision_avoidance);
  CHECK_FALSE(bench_defaults(BenchCondition::kNF).controllets[0].manipulability);
  CHECK(bench_defaults(BenchCondition::kCA).controllets[0].collision_avoidance);
  CHECK_FALSE(bench_defaults(BenchCondition::kCA).controllets[0].manipulability);
  CHECK(bench_defaults(BenchCondition::kCAMA).controllets[0].collision_avoidance);
  CHECK(bench_defaults(BenchCondition::kCAMA).controllets[0].manipulability);
  CHECK(bench_defaults(BenchCondition::kCMA).controllets[0].type == ControlletType::kCoupledCartesian);
  for (BenchCondition c : kAllConditions) CHECK(parse_condition(to_string(c)) == c);
  CHECK_THROWS_AS(parse_condition("XX"), ContractError);
}

TEST_CASE("unknown keys and bad values name their line") {
  CHECK(error_line("task: {id: 1}\nbogus: 3\n") == 2);
  CHECK(error_line("task: {id: 1}\nplant:\n  dt: 0.001\n  frobnicate: 1\n") == 4);
  CHECK(error_line("task: {id: 1}\ntrials: many\n") == 2);
  CHECK(error_line("benchmark: QQ\n") == 1);
  CHECK(error_line("task: {id: 4}\ncontrollets:\n  - name: u\n    type: warp\n    robots: [0]\n") == 4);
  CHECK_THROWS_AS(parse_scenario("[1, 2"), FormatError);
}

TEST_CASE("validation rejects inconsistent scenarios") {
  ScenarioConfig grasp = task_defaults(5);
  grasp.robots.resize(1);
  CHECK(rejected(grasp));

  ScenarioConfig unknown = task_defaults(1);
  unknown.active = {"nobody"};
  CHECK(rejected(unknown));

  ScenarioConfig dup = task_defaults(1);
  dup.active = {dup.controllets[0].name, dup.controllets[0].name};
  CHECK(rejected(dup));

  ScenarioConfig phase = task_defaults(4);
  phase.plant.reference.read_phase = phase.plant.dt;
  CHECK(rejected(phase));

  ScenarioConfig gaps = bench_defaults(BenchCondition::kNF);
  gaps.switching.min_gap = 10;
  gaps.switching.max_gap = 5;
  CHECK(rejected(gaps));

  ScenarioConfig q0 = task_defaults(1);
  q0.robots[0].q0 = VecN::Zero(3);
  CHECK(rejected(q0));

  CHECK_FALSE(rejected(task_defaults(5)));
}
