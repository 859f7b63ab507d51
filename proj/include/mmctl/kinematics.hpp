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

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "mmctl/model.hpp"

namespace mmctl {

// Base-frame poses of every joint frame (after its joint rotation) for one q.
// Computed once per tick and shared by FK, Jacobians and the recursions.
struct ChainFrames {
  int n = 0;
  std::array<Transform, kMaxDof> joint;
  std::array<Vec3, kMaxDof> axis;  // joint axes in base frame
  Transform ee;
};

ChainFrames compute_frames(const RobotModel& model, const VecN& q);

CartesianState forward_kinematics(const RobotModel& model, const VecN& q);
CartesianState pose_of(const ChainFrames& frames);

// Geometric Jacobian of the end-effector origin, [linear; angular] rows.
Jac jacobian(const RobotModel& model, const VecN& q);
Jac jacobian(const ChainFrames& frames);

// Linear-velocity Jacobian of a base-frame point rigidly attached to
// frame `frame` (1-based joint frame index; 0 is the fixed base, n+1 the
// end-effector which moves with link n).
Jac3 point_jacobian(const ChainFrames& frames, int frame, const Vec3& point);

// Origin of a frame by the same indexing as point_jacobian.
Vec3 frame_origin(const ChainFrames& frames, int frame);

// x - x_d as a 6-vector: position difference, then the rotation vector of
// R * R_d^T (the negated axis-angle of R_d * R^T), both in the base frame.
Vec6 pose_error(const CartesianState& x, const CartesianState& x_d);

struct ManipulabilityValue {
  double value = 0.0;
  bool clamped = false;  // numerically invalid result replaced by zero
};

// sqrt(det(J J^T)) for a Jacobian with at most six rows, evaluated as the
// product of |R_ii| from a QR factorization of J^T so that rank-deficient
// Jacobians give values at round-off level instead of sqrt(round-off).
template <typename Derived>
ManipulabilityValue manipulability(const Eigen::MatrixBase<Derived>& J) {
  using Transposed = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDof, 6>;
  if (J.rows() > 6 || J.rows() < 1) throw ContractError("manipulability: J needs 1..6 rows");
  if (J.cols() > kMaxDof) throw ContractError("manipulability: too many columns");
  if (J.cols() < J.rows()) return {0.0, false};
  Transposed jt = J.transpose();
  Eigen::HouseholderQR<Transposed> qr(jt);
  double prod = 1.0;
  for (int i = 0; i < J.rows(); ++i) prod *= qr.matrixQR()(i, i);
  const double m = std::abs(prod);
  if (!std::isfinite(m)) return {0.0, true};
  return {m, false};
}

}  // namespace mmctl
