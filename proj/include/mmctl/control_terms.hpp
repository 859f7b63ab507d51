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

// Torque building blocks shared by all controllets. Every function here is
// pure and allocation-free.
#pragma once

#include <cstdint>
#include <utility>

#include "mmctl/dynamics.hpp"

namespace mmctl {

struct ImpedanceGains {
  Vec6 K_c = (Vec6() << 100, 100, 50, 10, 10, 10).finished();
  Vec6 D_c = Vec6::Zero();  // filled with critical damping by make_impedance_gains
  VecN K_N;
  VecN D_N;
  VecN q_dN;
  // Cartesian inertia/Coriolis feedforward of the full impedance law. Off by
  // default: the task-torque form is used everywhere unless enabled.
  bool feedforward = false;
};

// D = 2 sqrt(K) element-wise.
Vec6 critical_damping(const Vec6& K);

// Defaults for an n-joint arm: K_c diag(100,100,50,10,10,10), critical D_c,
// nullspace stiffness 10 N·m/rad with critical damping, posture = home.
ImpedanceGains make_impedance_gains(const RobotModel& model);

// tau_task = J^T (-K_c e - D_c J qd) with e = pose_error(x, x_d) = x - x_d,
// so positive stiffness pulls x toward x_d.
VecN task_torque(const DynamicsTerms& dyn, const CartesianState& x, const CartesianState& x_d,
                 const ImpedanceGains& gains, const VecN& qd);

// Same law on a precomputed (possibly shaped) error.
VecN task_torque_from_error(const DynamicsTerms& dyn, const Vec6& error, const ImpedanceGains& gains,
                            const VecN& qd);

// J^T (Lambda xdd_d + Lambda (J M^-1 C qd - Jdot qd)) with Lambda the damped
// Cartesian inertia. The velocity term is evaluated along the current
// motion since only C(q, qd) qd is available on the hot path.
VecN impedance_feedforward(const DynamicsTerms& dyn, const Vec6& xdd_d, const Vec6& jdot_qd);

// Squared singular values of J at or below this fraction of the largest
// count as nullspace directions.
inline constexpr double kNullspaceRankTol = 1e-12;

// I - J^+ J with the exact pseudo-inverse: the orthogonal projector onto
// null(J), from an eigendecomposition of J^T J. The damped J_pinv is not
// used here since its leakage (lambda/sigma)^2 would bleed posture torque
// into the task.
MatN nullspace_projector(const DynamicsTerms& dyn);

// (I - J^+ J)^T (K_N (q_dN - q) - D_N qd)
VecN nullspace_torque(const DynamicsTerms& dyn, const JointState& state, const ImpedanceGains& gains);

struct ManipulabilityConfig {
  double k_m = 10.0;
  double m_0 = 0.1;
};

// Singularity potential V = k_m (m_kin - m_0)^2 below m_0, zero above.
double singularity_potential(const RobotModel& model, const VecN& q, const ManipulabilityConfig& cfg);

struct ManipulabilityTorque {
  VecN tau;
  double m_kin = 0.0;
  bool flagged = false;  // NaN replaced by zero or QR clamp hit
};

// -dV/dq by central differences with a 1e-6 rad step; exact zero when
// m_kin(q) > m_0.
ManipulabilityTorque manipulability_torque(const RobotModel& model, const VecN& q,
                                           const ManipulabilityConfig& cfg);

struct TorqueTerms {
  VecN task, null, cor, ca, ma;
  VecN cmd;  // exact sum of the five terms, before saturation

  void reset(int n);
  void sum();
};

struct ComposedCommand {
  VecN tau;  // clamped to the effort limits
  std::uint32_t saturated = 0;  // bit i set when joint i was clamped
  bool fault = false;           // a term was non-finite
};

// Sums the terms (left to right) into terms.cmd, then clamps per joint.
ComposedCommand compose_command(TorqueTerms& terms, const VecN& effort_limits);

// Pair goals offset +/-offset along the goal frame's y axis; first is +y.
std::pair<CartesianState, CartesianState> cdc_goal_split(const CartesianState& goal,
                                                         double offset = 0.15);

}  // namespace mmctl
