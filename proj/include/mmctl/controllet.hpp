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

// Controllets: pluggable torque units that own one or more robots on the
// shared bus. Each compute fills the five torque terms of every claimed
// robot; summation, saturation and fault handling belong to the manager.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmctl/bus.hpp"
#include "mmctl/collision.hpp"
#include "mmctl/ufic.hpp"

namespace mmctl {

enum class ControlletType {
  kJointImpedance,
  kCartesian,         // independent Cartesian impedance per claimed robot
  kCoupledCartesian,  // one pair goal split across two robots
  kUfic,
  kCoupledUfic,
};

ControlletType parse_controllet_type(std::string_view s);
const char* to_string(ControlletType t);

struct ControlletParams {
  Vec6 K_c = (Vec6() << 100, 100, 50, 10, 10, 10).finished();
  std::optional<Vec6> D_c;  // critical damping when unset
  double K_N = 10.0;
  std::optional<double> D_N;
  std::optional<VecN> q_dN;  // the model's home posture when unset
  bool feedforward = false;

  VecN joint_stiffness = (VecN(7) << 600, 600, 600, 600, 250, 150, 50).finished();
  VecN joint_damping = (VecN(7) << 50, 50, 50, 20, 20, 20, 10).finished();

  UficGains ufic;
  CollisionConfig collision;
  ManipulabilityConfig manipulability;
  double pair_offset = 0.15;
};

struct ControlletDescriptor {
  std::string name;
  ControlletType type = ControlletType::kCartesian;
  std::vector<int> robots;
  bool collision_avoidance = false;
  bool manipulability = false;
  ControlletParams params;

  // Throws ContractError on an empty or duplicate claim, a robot id out of
  // range, or parameters the type cannot use.
  void validate(int robot_count) const;
};

class Controllet {
 public:
  explicit Controllet(ControlletDescriptor d);
  virtual ~Controllet() = default;
  Controllet(const Controllet&) = delete;
  Controllet& operator=(const Controllet&) = delete;

  const ControlletDescriptor& descriptor() const { return desc_; }
  const std::string& name() const { return desc_.name; }
  const std::vector<int>& robots() const { return desc_.robots; }

  // Runs at the boundary where the controllet becomes active, before its
  // first compute; resets internal state from the current snapshot.
  virtual void activate(SharedRobotBus& bus) = 0;

  // Writes terms and flag bits for every claimed robot. Allocation-free.
  virtual void compute(SharedRobotBus& bus, double dt) = 0;

  // Force-channel state for the j-th claimed robot; null without one.
  virtual const UficState* force_state(std::size_t /*j*/) const { return nullptr; }

  // Runtime parameters. Names are resolved off the hot path; apply_param
  // only stores the value and refreshes derived gains.
  int param_id(std::string_view name) const;
  std::vector<std::string> param_names() const;
  bool param_valid(int id, double value) const;
  void apply_param(int id, double value);
  double param(int id) const;

 protected:
  void add_param(std::string name, double* value, double min_value);
  virtual void params_changed() {}

  ControlletDescriptor desc_;

 private:
  struct Param {
    std::string name;
    double* value;
    double min_value;
  };
  std::vector<Param> params_;
};

std::unique_ptr<Controllet> make_controllet(const ControlletDescriptor& d, const SharedRobotBus& bus);

}  // namespace mmctl
