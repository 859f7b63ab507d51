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

// Per-robot shared state: the sensor snapshot of the current tick, the
// derived dynamics, targets, and the command slot controllets write into.
#pragma once

#include <cstdint>
#include <vector>

#include "mmctl/control_terms.hpp"
#include "mmctl/trajectory.hpp"

namespace mmctl {

// Trace flag bits. The low 12 bits mark saturated joints.
enum CommandFlag : std::uint32_t {
  kFlagSaturatedMask = 0xFFFu,
  kFlagFault = 1u << 12,
  kFlagGravityHold = 1u << 13,
  kFlagCollisionActive = 1u << 14,
  kFlagCollisionFallback = 1u << 15,
  kFlagManipulability = 1u << 16,
  kFlagTankUnderflow = 1u << 17,
  kFlagContactLatched = 1u << 18,
  kFlagPlantFault = 1u << 19,
  kFlagPlantContact = 1u << 20,
};

struct RobotSlot {
  const RobotModel* model = nullptr;  // the controller's model
  Transform base;                     // world from base

  long tick = -1;  // tick of the snapshot below
  JointState state;
  ChainFrames frames;
  DynamicsTerms dyn;
  Vec6 F_ext = Vec6::Zero();  // estimated wrench on the environment, base frame
  TargetSlot target;

  TorqueTerms terms;
  VecN tau_cmd;
  long stamp = -1;  // tick of the last write to tau_cmd
  std::uint32_t flags = 0;
  int owner = -1;  // registry index of the computing controllet
};

class SharedRobotBus {
 public:
  SharedRobotBus() = default;
  SharedRobotBus(std::vector<const RobotModel*> models, std::vector<Transform> bases);

  int size() const { return static_cast<int>(slots_.size()); }
  RobotSlot& robot(int r) { return slots_[r]; }
  const RobotSlot& robot(int r) const { return slots_[r]; }

  // Publishes one robot's measurements for `tick` and derives frames and
  // dynamics from them.
  void update(int r, long tick, const JointState& state, const Vec6& F_ext);

 private:
  std::vector<RobotSlot> slots_;
};

}  // namespace mmctl
