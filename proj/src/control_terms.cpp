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

#include "mmctl/control_terms.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace mmctl {

Vec6 critical_damping(const Vec6& K) { return 2.0 * K.cwiseMax(0.0).cwiseSqrt(); }

ImpedanceGains make_impedance_gains(const RobotModel& model) {
  ImpedanceGains g;
  g.D_c = critical_damping(g.K_c);
  const int n = model.dof();
  g.K_N = VecN::Constant(n, 10.0);
  g.D_N = 2.0 * g.K_N.cwiseSqrt();
  g.q_dN = model.home.size() == n ? model.home : VecN::Zero(n);
  return g;
}

VecN task_torque_from_error(const DynamicsTerms& dyn, const Vec6& error, const ImpedanceGains& gains,
                            const VecN& qd) {
  const Vec6 xd = dyn.J * qd;
  const Vec6 wrench = -gains.K_c.cwiseProduct(error) - gains.D_c.cwiseProduct(xd);
  return dyn.J.transpose() * wrench;
}

VecN task_torque(const DynamicsTerms& dyn, const CartesianState& x, const CartesianState& x_d,
                 const ImpedanceGains& gains, const VecN& qd) {
  return task_torque_from_error(dyn, pose_error(x, x_d), gains, qd);
}

VecN impedance_feedforward(const DynamicsTerms& dyn, const Vec6& xdd_d, const Vec6& jdot_qd) {
  const auto Mllt = dyn.M.llt();
  const Jac MinvJt_t = Mllt.solve(dyn.J.transpose()).transpose();  // (M^-1 J^T)^T = J M^-1
  Mat6 inv_lambda = MinvJt_t * dyn.J.transpose();
  inv_lambda.diagonal().array() += kPinvDamping * kPinvDamping;
  const Mat6 lambda = inv_lambda.llt().solve(Mat6::Identity());
  const Vec6 bias = MinvJt_t * dyn.c_qd - jdot_qd;
  return dyn.J.transpose() * (lambda * (xdd_d + bias));
}

MatN nullspace_projector(const DynamicsTerms& dyn) {
  const int n = static_cast<int>(dyn.J.cols());
  const MatN JtJ = dyn.J.transpose() * dyn.J;
  const Eigen::SelfAdjointEigenSolver<MatN> eig(JtJ);
  const double cutoff = kNullspaceRankTol * std::max(eig.eigenvalues().maxCoeff(), 1.0);
  MatN P = MatN::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (eig.eigenvalues()[i] <= cutoff) {
      P.noalias() += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose();
    }
  }
  return P;
}

VecN nullspace_torque(const DynamicsTerms& dyn, const JointState& state, const ImpedanceGains& gains) {
  const VecN posture =
      gains.K_N.cwiseProduct(gains.q_dN - state.q) - gains.D_N.cwiseProduct(state.qd);
  return nullspace_projector(dyn).transpose() * posture;
}

double singularity_potential(const RobotModel& model, const VecN& q, const ManipulabilityConfig& cfg) {
  const double m = manipulability(jacobian(model, q)).value;
  if (m > cfg.m_0) return 0.0;
  return cfg.k_m * (m - cfg.m_0) * (m - cfg.m_0);
}

ManipulabilityTorque manipulability_torque(const RobotModel& model, const VecN& q,
                                           const ManipulabilityConfig& cfg) {
  ManipulabilityTorque out;
  const int n = model.dof();
  out.tau = VecN::Zero(n);
  const auto mv = manipulability(jacobian(model, q));
  out.m_kin = mv.value;
  out.flagged = mv.clamped;
  if (out.m_kin > cfg.m_0) return out;

  constexpr double eps = 1e-6;
  VecN qp = q;
  for (int i = 0; i < n; ++i) {
    qp[i] = q[i] + eps;
    const double vp = singularity_potential(model, qp, cfg);
    qp[i] = q[i] - eps;
    const double vm = singularity_potential(model, qp, cfg);
    qp[i] = q[i];
    const double t = -(vp - vm) / (2 * eps);
    if (std::isfinite(t)) {
      out.tau[i] = t;
    } else {
      out.flagged = true;
    }
  }
  return out;
}

void TorqueTerms::reset(int n) {
  task = VecN::Zero(n);
  null = VecN::Zero(n);
  cor = VecN::Zero(n);
  ca = VecN::Zero(n);
  ma = VecN::Zero(n);
  cmd = VecN::Zero(n);
}

void TorqueTerms::sum() { cmd = task + null + cor + ca + ma; }

ComposedCommand compose_command(TorqueTerms& terms, const VecN& effort_limits) {
  terms.sum();
  ComposedCommand out;
  const int n = static_cast<int>(terms.cmd.size());
  out.tau = terms.cmd;
  if (!terms.cmd.allFinite()) {
    out.fault = true;
    return out;
  }
  for (int i = 0; i < n; ++i) {
    const double lim = effort_limits[i];
    if (out.tau[i] > lim) {
      out.tau[i] = lim;
      out.saturated |= 1u << i;
    } else if (out.tau[i] < -lim) {
      out.tau[i] = -lim;
      out.saturated |= 1u << i;
    }
  }
  return out;
}

std::pair<CartesianState, CartesianState> cdc_goal_split(const CartesianState& goal, double offset) {
  const Vec3 dy = goal.orientation * Vec3(0.0, offset, 0.0);
  CartesianState a = goal;
  CartesianState b = goal;
  a.position = goal.position + dy;
  b.position = goal.position - dy;
  return {a, b};
}

}  // namespace mmctl
