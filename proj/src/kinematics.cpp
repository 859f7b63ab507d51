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

#include "mmctl/kinematics.hpp"

namespace mmctl {

namespace {

void check_q(const RobotModel& model, const VecN& q) {
  if (q.size() != model.dof()) {
    throw ContractError("expected q of length " + std::to_string(model.dof()) + ", got " +
                        std::to_string(q.size()));
  }
  if (!q.allFinite()) throw ContractError("q contains non-finite entries");
}

}  // namespace

ChainFrames compute_frames(const RobotModel& model, const VecN& q) {
  check_q(model, q);
  ChainFrames f;
  f.n = model.dof();
  Transform parent;
  for (int i = 0; i < f.n; ++i) {
    const auto& j = model.joints[i];
    Transform t = parent * j.origin;
    f.axis[i] = t.rotation * j.axis;
    t.rotation = t.rotation * Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    f.joint[i] = t;
    parent = t;
  }
  f.ee = parent * model.ee;
  return f;
}

CartesianState pose_of(const ChainFrames& frames) {
  CartesianState x;
  x.position = frames.ee.translation;
  x.orientation = Quat(frames.ee.rotation).normalized();
  return x;
}

CartesianState forward_kinematics(const RobotModel& model, const VecN& q) {
  return pose_of(compute_frames(model, q));
}

Jac jacobian(const ChainFrames& f) {
  Jac J(6, f.n);
  const Vec3& p = f.ee.translation;
  for (int i = 0; i < f.n; ++i) {
    const Vec3& z = f.axis[i];
    J.block<3, 1>(0, i) = z.cross(p - f.joint[i].translation);
    J.block<3, 1>(3, i) = z;
  }
  return J;
}

Jac jacobian(const RobotModel& model, const VecN& q) {
  return jacobian(compute_frames(model, q));
}

Vec3 frame_origin(const ChainFrames& f, int frame) {
  if (frame <= 0) return Vec3::Zero();
  if (frame > f.n) return f.ee.translation;
  return f.joint[frame - 1].translation;
}

Jac3 point_jacobian(const ChainFrames& f, int frame, const Vec3& point) {
  if (frame < 0 || frame > f.n + 1) throw ContractError("point_jacobian: frame index out of range");
  Jac3 J = Jac3::Zero(3, f.n);
  const int moving = std::min(frame, f.n);
  for (int i = 0; i < moving; ++i) {
    J.col(i) = f.axis[i].cross(point - f.joint[i].translation);
  }
  return J;
}

Vec6 pose_error(const CartesianState& x, const CartesianState& x_d) {
  Vec6 e;
  e.head<3>() = x.position - x_d.position;
  // Quaternion of R * R_d^T written out term by term so that identical
  // orientations cancel to an exact zero.
  const Quat& a = x.orientation;
  const Quat& d = x_d.orientation;
  double w = a.w() * d.w() + a.vec().dot(d.vec());
  Vec3 v = d.w() * a.vec() - a.w() * d.vec() - a.vec().cross(d.vec());
  if (w < 0.0) {
    w = -w;
    v = -v;
  }
  const double sn = v.norm();
  if (sn == 0.0) {
    e.tail<3>().setZero();
  } else {
    e.tail<3>() = (2.0 * std::atan2(sn, w) / sn) * v;
  }
  return e;
}

}  // namespace mmctl
