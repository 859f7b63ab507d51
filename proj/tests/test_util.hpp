// Shared fixtures for the unit tests: small analytic chains, random
// configurations and an independent homogeneous-matrix FK oracle.
#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "mmctl/model.hpp"

namespace mmctl::testing {

inline std::string source_path(const std::string& rel) {
  return std::string(MMCTL_SOURCE_DIR) + "/" + rel;
}

inline LinkInertia rod(double mass, double length) {
  LinkInertia l;
  l.mass = mass;
  l.com = Vec3(length / 2, 0, 0);
  const double i = mass * length * length / 12.0;
  l.inertia = Vec3(1e-4, i + 1e-4, i + 1e-4).asDiagonal();
  return l;
}

// Planar chain of revolute Z joints with unit-spaced links along X.
inline RobotModel planar_chain(int n, double length = 1.0, double mass = 1.0) {
  RobotModel m;
  m.name = "planar" + std::to_string(n);
  for (int i = 0; i < n; ++i) {
    JointSpec j;
    j.name = "j" + std::to_string(i + 1);
    j.origin.translation = i == 0 ? Vec3::Zero() : Vec3(length, 0, 0);
    j.lower = -10;
    j.upper = 10;
    m.joints.push_back(j);
    m.links.push_back(rod(mass, length));
  }
  m.ee.translation = Vec3(length, 0, 0);
  m.gravity = Vec3(0, 0, -9.81);
  m.home = VecN::Zero(n);
  m.validate();
  return m;
}

// Single pendulum swinging in the X-Z plane about a Y axis, point-like mass
// at distance `length`.
inline RobotModel pendulum(double length, double mass) {
  RobotModel m;
  m.name = "pendulum";
  JointSpec j;
  j.axis = Vec3::UnitY();
  j.lower = -10;
  j.upper = 10;
  m.joints.push_back(j);
  LinkInertia l;
  l.mass = mass;
  l.com = Vec3(0, 0, -length);
  l.inertia = Vec3(1e-9, 1e-9, 1e-9).asDiagonal();
  m.links.push_back(l);
  m.ee.translation = Vec3(0, 0, -length);
  m.home = VecN::Zero(1);
  m.validate();
  return m;
}

inline VecN random_q(const RobotModel& m, std::mt19937& rng, double margin = 0.05) {
  VecN q(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    const double lo = std::max(m.joints[i].lower, -3.0) + margin;
    const double hi = std::min(m.joints[i].upper, 3.0) - margin;
    q[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return q;
}

inline VecN random_vec(int n, std::mt19937& rng, double scale = 1.0) {
  VecN v(n);
  std::normal_distribution<double> d(0.0, scale);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// FK oracle: explicit 4x4 products of Rz*Ry*Rx origin matrices and a
// Rodrigues joint rotation, independent of Transform and AngleAxis.
inline Eigen::Matrix4d oracle_rpy(double x, double y, double z, double r, double p, double yw) {
  Eigen::Matrix3d Rx, Ry, Rz;
  Rx << 1, 0, 0, 0, std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r);
  Ry << std::cos(p), 0, std::sin(p), 0, 1, 0, -std::sin(p), 0, std::cos(p);
  Rz << std::cos(yw), -std::sin(yw), 0, std::sin(yw), std::cos(yw), 0, 0, 0, 1;
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() = Rz * Ry * Rx;
  T.topRightCorner<3, 1>() << x, y, z;
  return T;
}

inline Eigen::Matrix4d oracle_rodrigues(const Eigen::Vector3d& k, double angle) {
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() =
      Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
  return T;
}

}  // namespace mmctl::testing
