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

// Simulated arms sharing one world: semi-implicit Euler rigid-body
// integration, penalty contact at the end-effector point against planes and
// an optional free box, sensor noise, and a command delay line.
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mmctl/dynamics.hpp"

namespace mmctl {

struct ContactParams {
  double stiffness = 3e4;  // N/m
  double damping = 300.0;  // N·s/m, also the tangential viscous coefficient
  double friction = 0.5;   // Coulomb cap on the tangential force

  void validate() const;
};

// Half-space bounded by a plane through `point`; `normal` points out of
// the solid.
struct PlaneContact {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  ContactParams params;
};

// Axis-aligned box moving as a point mass (no rotation).
struct BoxConfig {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents{0.1, 0.15, 0.1};
  double mass = 1.0;
  ContactParams params;
};

struct NoiseConfig {
  double q = 0.0;      // rad
  double qd = 0.0;     // rad/s
  double tau = 0.0;    // N·m
  double force = 0.0;  // N (and N·m on the moment rows)

  static NoiseConfig defaults() { return {1e-5, 1e-3, 0.05, 0.2}; }
  bool zero() const { return q == 0 && qd == 0 && tau == 0 && force == 0; }
  void validate() const;
};

// Per-link multiplicative factors; an empty vector means all ones. The
// mass and inertia factors scale the mass and the inertia about the COM.
// The COM factor scales the COM vector while keeping the inertia about the
// link origin fixed, so large shifts can become non-physical.
struct Perturbation {
  std::vector<double> mass;
  std::vector<double> com;
  std::vector<double> inertia;

  bool identity() const;
};

inline constexpr double kMinPerturbation = 0.5;
inline constexpr double kMaxPerturbation = 2.0;

// Throws ContractError for factors outside [0.5, 2] or a non-physical
// result.
RobotModel perturb(const RobotModel& model, const Perturbation& p);

struct RobotPlantConfig {
  RobotModel physics;    // parameters the world integrates
  RobotModel estimator;  // model behind the reported F_EE estimate
  Transform base;        // world from robot base; rotation about z only
  VecN q0;
  VecN qd0;
  NoiseConfig noise;
  int command_delay = 0;    // ticks between command and application
  double read_phase = 0.0;  // s after the tick at which the command is sampled
};

struct WorldConfig {
  double dt = 1e-3;
  std::vector<RobotPlantConfig> robots;
  std::vector<PlaneContact> planes;
  std::optional<BoxConfig> box;
  std::uint64_t seed = 1;
  double divergence_limit = 50.0;  // rad/s on |qd|

  void validate() const;
};

enum PlantFlag : std::uint32_t {
  kPlantFault = 1u << 0,
  kPlantContact = 1u << 1,
  kPlantJointLimit = 1u << 2,
};

struct PlantOutput {
  long tick = 0;
  JointState state;  // noisy, timestamp = tick time
  VecN tau_meas;     // torque applied over the previous step, noisy
  Vec6 F_EE = Vec6::Zero();  // estimated wrench on the environment, base frame, noisy
  JointState state_true;
  VecN tau_true;
  Vec6 F_true = Vec6::Zero();  // contact wrench the robot exerts, base frame
  double read_time = 0.0;  // when the plant sampled the command it applied last
  std::uint32_t flags = 0;
};

struct BoxState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

class World {
 public:
  explicit World(WorldConfig cfg);

  int robot_count() const { return static_cast<int>(robots_.size()); }
  long tick() const { return tick_; }
  double time() const { return tick_ * cfg_.dt; }
  double dt() const { return cfg_.dt; }
  const PlantOutput& output(int r) const { return robots_[r].out; }
  const std::optional<BoxState>& box() const { return box_; }
  const WorldConfig& config() const { return cfg_; }
  bool faulted() const;

  // Applies one command per robot (after each robot's delay line) and
  // advances every body by one step. Allocation-free.
  void step(std::span<const VecN> tau_cmd);

 private:
  struct Robot {
    RobotPlantConfig cfg;
    VecN q, qd;
    std::vector<VecN> delay;  // ring of command_delay + 1 entries
    int delay_head = 0;
    VecN tau_applied;
    VecN tau_contact;
    Vec3 f_world = Vec3::Zero();  // contact force on the end-effector
    std::mt19937_64 rng;
    bool fault = false;
    std::uint32_t step_flags = 0;
    PlantOutput out;
  };

  void sense(Robot& r);
  Vec3 contact_on_point(const Vec3& p, const Vec3& v, Vec3* box_force, bool* touching) const;

  WorldConfig cfg_;
  std::vector<Robot> robots_;
  std::optional<BoxState> box_;
  long tick_ = 0;
};

// Force on a point penetrating a surface by `depth` along outward normal n,
// moving with velocity v relative to the surface.
Vec3 penalty_force(const ContactParams& p, double depth, const Vec3& n, const Vec3& v);

}  // namespace mmctl
