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

// Scenario documents: which robots, controllets, plants and targets a run
// uses. Parsing starts from the defaults of the named task or benchmark
// condition and overlays every key present; unknown keys are errors.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmctl/controllet.hpp"
#include "mmctl/manager.hpp"

namespace mmctl {

enum class BenchCondition { kNF, kCA, kMA, kCAMA, kCMA };

BenchCondition parse_condition(std::string_view s);
const char* to_string(BenchCondition c);
inline constexpr BenchCondition kAllConditions[] = {BenchCondition::kNF, BenchCondition::kCA,
                                                    BenchCondition::kMA, BenchCondition::kCAMA,
                                                    BenchCondition::kCMA};

struct RobotSetup {
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  std::optional<VecN> q0;  // the model's home posture when unset
};

// One plant instance's deviations from the nominal model.
struct PlantSide {
  Perturbation perturbation;
  NoiseConfig noise;
  int command_delay = 0;
  double read_phase = 0.0;
};

struct PlantSetup {
  double dt = 1e-3;
  ContactParams contact;
  // Horizontal plane at the first robot's start end-effector height plus
  // surface_offset.
  bool surface = false;
  double surface_offset = 0.0;
  // Box centred between the start end-effectors.
  bool box = false;
  Vec3 box_half_extents{0.1, 0.15, 0.1};
  double box_mass = 1.0;
  double divergence_limit = 50.0;
  PlantSide reference;  // stands in for the physical robot
  PlantSide sim;        // the simulation under evaluation
};

struct IdentificationSetup {
  double duration = 20.0;  // s of excitation
  double lift = 0.15;      // m the excitation centre sits above the start pose
  double range_fraction = 0.5;
  double lambda = 1e-8;
  double cutoff_hz = 30.0;
  int stride = 5;
  std::uint64_t seed = 7;
};

struct SwitchSetup {
  int trials = 50;
  int min_gap = 100;  // ticks between requests
  int max_gap = 300;
};

struct ScenarioConfig {
  std::string name;
  std::string model;  // model file; empty selects the built-in arm
  TaskSpec task;      // target generator (benchmarks use it too)
  std::optional<BenchCondition> benchmark;
  std::vector<RobotSetup> robots;
  std::vector<ControlletDescriptor> controllets;
  std::vector<std::string> active;
  PlantSetup plant;
  double duration = 10.0;
  int trials = 5;
  std::uint64_t seed = 1;
  TimeMode time_mode = TimeMode::kVirtual;
  std::string out = "runs/out";
  IdentificationSetup identification;
  SwitchSetup switching;
  double budget_us = 100.0;

  // Throws ContractError naming the first violated rule.
  void validate(int dof) const;
};

ScenarioConfig task_defaults(int task_id);
ScenarioConfig bench_defaults(BenchCondition c);

// Two arms facing each other across the world y axis.
std::vector<RobotSetup> facing_pair();

// Throws FormatError with the offending line.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

// Every field written out, doubles at round-trip precision.
std::string dump_scenario(const ScenarioConfig& cfg);

}  // namespace mmctl
