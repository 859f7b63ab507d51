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

#pragma once

#include <string>
#include <vector>

#include "mmctl/types.hpp"

namespace mmctl {

struct LinkInertia {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();        // link frame
  Mat3 inertia = Mat3::Identity();  // about the COM, link frame axes
};

struct JointSpec {
  std::string name;
  Transform origin;  // parent frame -> joint frame at q = 0
  Vec3 axis = Vec3::UnitZ();
  double lower = -3.14159;
  double upper = 3.14159;
  double velocity_limit = 2.0;
  double effort_limit = 100.0;
  double armature = 0.0;  // reflected rotor inertia, added to M's diagonal
};

// Serial chain of revolute joints. Link i is rigidly attached to joint i's
// frame; `ee` locates the end-effector frame in the last joint frame.
struct RobotModel {
  std::string name = "unnamed";
  int version = 1;
  std::vector<JointSpec> joints;
  std::vector<LinkInertia> links;
  Transform ee;
  Vec3 gravity{0.0, 0.0, -9.81};
  VecN home;

  int dof() const { return static_cast<int>(joints.size()); }
  VecN lower_limits() const;
  VecN upper_limits() const;
  VecN effort_limits() const;
  VecN velocity_limits() const;
  VecN armature() const;

  // Throws ContractError naming the first violated invariant.
  void validate() const;
};

// Positive mass, symmetric positive-definite inertia whose principal moments
// satisfy the triangle inequality.
bool is_physical(double mass, const Mat3& inertia, double tol = 0.0);

RobotModel parse_model(const std::string& text);
RobotModel load_model(const std::string& path);
std::string dump_model(const RobotModel& model);
void save_model(const RobotModel& model, const std::string& path);

// The built-in arm, parsed from the bundled models/arm7.yaml.
const RobotModel& default_model();

}  // namespace mmctl
