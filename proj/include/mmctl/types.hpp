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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmctl {

// Upper bound on joints per arm. All per-joint vectors use Eigen's
// fixed-capacity dynamic storage so the control tick never allocates.
inline constexpr int kMaxDof = 12;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;

using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDof, 1>;
using MatN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDof, kMaxDof>;
using Jac = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, kMaxDof>;
using JacPinv = Eigen::Matrix<double, Eigen::Dynamic, 6, 0, kMaxDof, 6>;
using Jac3 = Eigen::Matrix<double, 3, Eigen::Dynamic, 0, 3, kMaxDof>;

// Rigid transform: p_parent = rotation * p_child + translation.
struct Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Transform operator*(const Transform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Transform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  static Transform from_xyz_rpy(const Vec3& xyz, const Vec3& rpy);
};

struct JointState {
  double timestamp = 0.0;
  VecN q;
  VecN qd;
  VecN qdd;  // empty unless produced by a plant
};

struct CartesianState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec6 twist = Vec6::Zero();
};

// Violated preconditions (dimension mismatch, bad arguments).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input documents; line is 1-based, 0 when unknown.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace mmctl
