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

// Parametric 1 kHz target generators for the five validation tasks.
#pragma once

#include <span>
#include <vector>

#include "mmctl/types.hpp"

namespace mmctl {

// Desired values for one robot. Poses and wrenches are in the world frame;
// wrenches are what the robot should exert on the environment.
struct TargetSlot {
  CartesianState pose;
  VecN q;
  VecN qd;
  Vec6 wrench = Vec6::Zero();
};

struct TaskSpec {
  int id = 1;
  // 1: joint sinusoid around the start posture.
  double joint_amplitude = 0.2;  // rad, every joint
  double joint_frequency = 0.2;  // Hz
  // 2: circle in the world y-z plane through the start point.
  double circle_radius = 0.05;
  double circle_period = 5.0;
  // 3: fixed pose, normal force 0 -> peak -> 0 over one period.
  double force_peak = 30.0;
  double force_period = 10.0;
  // 4: constant normal force while circling in x-y.
  double contact_force = 9.81;
  double contact_radius = 0.10;
  double contact_period = 10.0;
  // 5: squeeze a box from opposite sides and move it up and back down.
  double squeeze = 20.0;
  double lift = 0.20;
  double lift_period = 10.0;
  // Write the pair goal (midpoint of the start poses plus the task motion)
  // into the first robot's slot. Always on for task 5.
  bool coupled = false;

  void validate() const;
};

struct RobotStart {
  VecN q;
  CartesianState ee;  // world frame
};

class TaskSource {
 public:
  TaskSource(TaskSpec spec, std::vector<RobotStart> starts);

  const TaskSpec& spec() const { return spec_; }
  int robot_count() const { return static_cast<int>(starts_.size()); }

  // Fills one slot per robot for time t >= 0. Allocation-free.
  void sample(double t, std::span<TargetSlot> out) const;

  // Scalar desired normal force magnitude of tasks 3 and 4 (0 otherwise).
  double normal_force(double t) const;

  // Largest force magnitude the task ever requests (sizes energy tanks).
  double nominal_force() const;

 private:
  TaskSpec spec_;
  std::vector<RobotStart> starts_;
  Vec3 pair_center_ = Vec3::Zero();
};

}  // namespace mmctl
