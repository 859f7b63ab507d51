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

#include "mmctl/kinematics.hpp"

namespace mmctl {

// Fixed damping of the pseudo-inverse used for nullspace projection and
// wrench estimation.
inline constexpr double kPinvDamping = 0.01;

struct DynamicsTerms {
  MatN M;        // includes joint armature on the diagonal
  VecN c_qd;     // C(q, qd) qd
  VecN g;        // gravity torque
  Jac J;
  JacPinv J_pinv;
  CartesianState x;  // end-effector pose; twist = J qd
};

// Rigid-body inverse dynamics by recursive Newton-Euler. Armature is not
// included; see inverse_dynamics.
VecN rnea(const RobotModel& model, const ChainFrames& frames, const VecN& qd, const VecN& qdd,
          bool with_gravity = true);
VecN rnea(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd,
          bool with_gravity = true);

// M(q) qdd + C(q, qd) qd + g(q), armature included.
VecN inverse_dynamics(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd);

// Composite rigid-body algorithm.
MatN mass_matrix(const RobotModel& model, const ChainFrames& frames);
MatN mass_matrix(const RobotModel& model, const VecN& q);

VecN gravity_torque(const RobotModel& model, const VecN& q);
VecN coriolis_torque(const RobotModel& model, const VecN& q, const VecN& qd);

// Forward dynamics: solves M qdd = tau - C qd - g.
VecN forward_dynamics(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& tau);

JacPinv damped_pinv(const Jac& J, double lambda = kPinvDamping);

DynamicsTerms dynamics(const RobotModel& model, const JointState& state);
// Same, reusing frames already computed for state.q.
DynamicsTerms dynamics(const RobotModel& model, const ChainFrames& frames, const JointState& state);

double kinetic_energy(const RobotModel& model, const VecN& q, const VecN& qd);
double potential_energy(const RobotModel& model, const VecN& q);

}  // namespace mmctl
