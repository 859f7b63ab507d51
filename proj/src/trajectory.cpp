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

#include "mmctl/trajectory.hpp"

#include <cmath>
#include <string>

namespace mmctl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

void TaskSpec::validate() const {
  if (id < 1 || id > 5) throw ContractError("task: unknown task id " + std::to_string(id));
  if (!(joint_frequency >= 0.0) || !(circle_period > 0.0) || !(force_period > 0.0) ||
      !(contact_period > 0.0) || !(lift_period > 0.0)) {
    throw ContractError("task: periods must be positive");
  }
  if (!(circle_radius >= 0.0) || !(contact_radius >= 0.0) || !(force_peak >= 0.0) ||
      !(contact_force >= 0.0) || !(squeeze >= 0.0)) {
    throw ContractError("task: radii and forces must be non-negative");
  }
}

TaskSource::TaskSource(TaskSpec spec, std::vector<RobotStart> starts)
    : spec_(spec), starts_(std::move(starts)) {
  spec_.validate();
  if (starts_.empty()) throw ContractError("task: at least one robot");
  if (spec_.id == 5) {
    spec_.coupled = true;
    if (starts_.size() != 2) throw ContractError("task 5 requires exactly 2 robots");
  }
  for (const auto& s : starts_) pair_center_ += s.ee.position;
  pair_center_ /= static_cast<double>(starts_.size());
}

double TaskSource::normal_force(double t) const {
  switch (spec_.id) {
    case 3:
      return 0.5 * spec_.force_peak * (1.0 - std::cos(kTwoPi * t / spec_.force_period));
    case 4:
      return spec_.contact_force;
    default:
      return 0.0;
  }
}

double TaskSource::nominal_force() const {
  switch (spec_.id) {
    case 3:
      return spec_.force_peak;
    case 4:
      return spec_.contact_force;
    case 5:
      return spec_.squeeze;
    default:
      return 0.0;
  }
}

void TaskSource::sample(double t, std::span<TargetSlot> out) const {
  if (out.size() != starts_.size()) throw ContractError("task: one slot per robot");
  if (!(t >= 0.0)) throw ContractError("task: time must be non-negative");
  for (std::size_t r = 0; r < starts_.size(); ++r) {
    const RobotStart& s = starts_[r];
    TargetSlot& slot = out[r];
    slot.pose = s.ee;
    slot.pose.twist.setZero();
    slot.q = s.q;
    slot.qd = VecN::Zero(s.q.size());
    slot.wrench.setZero();

    switch (spec_.id) {
      case 1: {
        const double w = kTwoPi * spec_.joint_frequency;
        slot.q.array() += spec_.joint_amplitude * std::sin(w * t);
        slot.qd.setConstant(spec_.joint_amplitude * w * std::cos(w * t));
        break;
      }
      case 2: {
        const double w = kTwoPi / spec_.circle_period;
        const double r0 = spec_.circle_radius;
        slot.pose.position += Vec3(0.0, r0 * (std::cos(w * t) - 1.0), r0 * std::sin(w * t));
        slot.pose.twist.head<3>() = Vec3(0.0, -r0 * w * std::sin(w * t), r0 * w * std::cos(w * t));
        break;
      }
      case 3:
        slot.wrench[2] = -normal_force(t);
        break;
      case 4: {
        const double w = kTwoPi / spec_.contact_period;
        const double r0 = spec_.contact_radius;
        slot.pose.position += Vec3(r0 * (std::cos(w * t) - 1.0), r0 * std::sin(w * t), 0.0);
        slot.pose.twist.head<3>() = Vec3(-r0 * w * std::sin(w * t), r0 * w * std::cos(w * t), 0.0);
        slot.wrench[2] = -normal_force(t);
        break;
      }
      case 5: {
        const double w = kTwoPi / spec_.lift_period;
        slot.pose.position.z() += 0.5 * spec_.lift * (1.0 - std::cos(w * t));
        slot.pose.twist[2] = 0.5 * spec_.lift * w * std::sin(w * t);
        Vec3 inward = pair_center_ - s.ee.position;
        inward.z() = 0.0;
        if (inward.norm() > 0.0) slot.wrench.head<3>() = spec_.squeeze * inward.normalized();
        break;
      }
    }
  }

  if (spec_.coupled) {
    // Pair goal: the start midpoint carried by the same motion as robot 0.
    TargetSlot& first = out[0];
    const Vec3 motion = first.pose.position - starts_[0].ee.position;
    first.pose.position = pair_center_ + motion;
    first.pose.orientation = Quat::Identity();
  }
}

}  // namespace mmctl
