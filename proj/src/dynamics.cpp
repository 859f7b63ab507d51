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

#include "mmctl/dynamics.hpp"

#include <Eigen/Cholesky>

namespace mmctl {

namespace {

void check_vec(const RobotModel& model, const VecN& v, const char* what) {
  if (v.size() != model.dof()) {
    throw ContractError(std::string(what) + ": expected length " + std::to_string(model.dof()));
  }
}

}  // namespace

// Quantities are expressed in the base frame. Moments are taken about each
// joint origin, which is fixed in both the parent and the child link.
VecN rnea(const RobotModel& model, const ChainFrames& f, const VecN& qd, const VecN& qdd,
          bool with_gravity) {
  check_vec(model, qd, "rnea qd");
  check_vec(model, qdd, "rnea qdd");
  const int n = f.n;
  std::array<Vec3, kMaxDof> force;
  std::array<Vec3, kMaxDof> moment;
  std::array<Vec3, kMaxDof> com;

  Vec3 w = Vec3::Zero();
  Vec3 wd = Vec3::Zero();
  Vec3 a = with_gravity ? Vec3(-model.gravity) : Vec3::Zero();
  Vec3 p_prev = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3& z = f.axis[i];
    const Vec3& p = f.joint[i].translation;
    const Mat3& R = f.joint[i].rotation;
    const Vec3 d = p - p_prev;
    a += wd.cross(d) + w.cross(w.cross(d));
    const Vec3 w_new = w + z * qd[i];
    wd += z * qdd[i] + w.cross(z * qd[i]);
    w = w_new;

    const auto& link = model.links[i];
    const Vec3 rc = R * link.com;
    const Vec3 ac = a + wd.cross(rc) + w.cross(w.cross(rc));
    const Mat3 I = R * link.inertia * R.transpose();
    force[i] = link.mass * ac;
    moment[i] = I * wd + w.cross(I * w);
    com[i] = rc;
    p_prev = p;
  }

  VecN tau(n);
  Vec3 f_next = Vec3::Zero();
  Vec3 n_next = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Vec3 d = (i + 1 < n) ? Vec3(f.joint[i + 1].translation - f.joint[i].translation)
                               : Vec3::Zero();
    const Vec3 n_i = moment[i] + com[i].cross(force[i]) + n_next + d.cross(f_next);
    f_next = force[i] + f_next;
    n_next = n_i;
    tau[i] = f.axis[i].dot(n_i);
  }
  return tau;
}

VecN rnea(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd,
          bool with_gravity) {
  return rnea(model, compute_frames(model, q), qd, qdd, with_gravity);
}

VecN inverse_dynamics(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd) {
  VecN tau = rnea(model, q, qd, qdd, true);
  tau += model.armature().cwiseProduct(qdd);
  return tau;
}

// Composite of links i..n about the base origin: mass, first moment h = m c
// and rotational inertia I_O. Unit acceleration of joint i with everything
// else at rest needs the spatial force (f, n_O) = (m a_O + z x h, I_O z + h x a_O)
// with a_O = p_i x z; joint j <= i sees z_j . (n_O - p_j x f).
MatN mass_matrix(const RobotModel& model, const ChainFrames& f) {
  const int n = f.n;
  MatN M = MatN::Zero(n, n);
  double mass = 0.0;
  Vec3 h = Vec3::Zero();
  Mat3 I_O = Mat3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const auto& link = model.links[i];
    const Mat3& R = f.joint[i].rotation;
    const Vec3 c = R * link.com + f.joint[i].translation;
    Mat3 S;
    S << 0, -c.z(), c.y(), c.z(), 0, -c.x(), -c.y(), c.x(), 0;
    mass += link.mass;
    h += link.mass * c;
    I_O += R * link.inertia * R.transpose() + link.mass * S.transpose() * S;

    const Vec3& z = f.axis[i];
    const Vec3 a_O = f.joint[i].translation.cross(z);
    const Vec3 force = mass * a_O + z.cross(h);
    const Vec3 moment = I_O * z + h.cross(a_O);
    for (int j = 0; j <= i; ++j) {
      const Vec3& pj = f.joint[j].translation;
      const double v = f.axis[j].dot(moment - pj.cross(force));
      M(j, i) = v;
      M(i, j) = v;
    }
    M(i, i) += model.joints[i].armature;
  }
  return M;
}

MatN mass_matrix(const RobotModel& model, const VecN& q) {
  return mass_matrix(model, compute_frames(model, q));
}

VecN gravity_torque(const RobotModel& model, const VecN& q) {
  const VecN zero = VecN::Zero(model.dof());
  return rnea(model, q, zero, zero, true);
}

VecN coriolis_torque(const RobotModel& model, const VecN& q, const VecN& qd) {
  const VecN zero = VecN::Zero(model.dof());
  const ChainFrames f = compute_frames(model, q);
  return rnea(model, f, qd, zero, true) - rnea(model, f, zero, zero, true);
}

VecN forward_dynamics(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& tau) {
  check_vec(model, tau, "forward_dynamics tau");
  const ChainFrames f = compute_frames(model, q);
  const VecN zero = VecN::Zero(model.dof());
  const VecN bias = rnea(model, f, qd, zero, true);
  const MatN M = mass_matrix(model, f);
  return M.llt().solve(tau - bias);
}

JacPinv damped_pinv(const Jac& J, double lambda) {
  const Mat6 JJt = J * J.transpose() + lambda * lambda * Mat6::Identity();
  return J.transpose() * JJt.llt().solve(Mat6::Identity());
}

DynamicsTerms dynamics(const RobotModel& model, const JointState& state) {
  check_vec(model, state.q, "dynamics q");
  return dynamics(model, compute_frames(model, state.q), state);
}

DynamicsTerms dynamics(const RobotModel& model, const ChainFrames& f, const JointState& state) {
  check_vec(model, state.qd, "dynamics qd");
  const VecN zero = VecN::Zero(model.dof());
  DynamicsTerms d;
  d.g = rnea(model, f, zero, zero, true);
  d.c_qd = rnea(model, f, state.qd, zero, true) - d.g;
  d.M = mass_matrix(model, f);
  d.J = jacobian(f);
  d.J_pinv = damped_pinv(d.J);
  d.x = pose_of(f);
  d.x.twist = d.J * state.qd;
  return d;
}

double kinetic_energy(const RobotModel& model, const VecN& q, const VecN& qd) {
  return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

double potential_energy(const RobotModel& model, const VecN& q) {
  const ChainFrames f = compute_frames(model, q);
  double u = 0.0;
  for (int i = 0; i < f.n; ++i) {
    const Vec3 c = f.joint[i].rotation * model.links[i].com + f.joint[i].translation;
    u -= model.links[i].mass * model.gravity.dot(c);
  }
  return u;
}

}  // namespace mmctl
