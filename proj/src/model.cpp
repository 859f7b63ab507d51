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

#include "mmctl/model.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "mmctl/yaml_util.hpp"
#include "model_text.hpp"

namespace mmctl {

Transform Transform::from_xyz_rpy(const Vec3& xyz, const Vec3& rpy) {
  Transform t;
  t.rotation = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                   .toRotationMatrix();
  t.translation = xyz;
  return t;
}

namespace {

template <typename F>
VecN collect(const RobotModel& m, F&& f) {
  VecN v(m.dof());
  for (int i = 0; i < m.dof(); ++i) v[i] = f(m.joints[i]);
  return v;
}

Vec3 rpy_of(const Mat3& r) {
  // Inverse of Rz(yaw) * Ry(pitch) * Rx(roll).
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

}  // namespace

VecN RobotModel::lower_limits() const { return collect(*this, [](auto& j) { return j.lower; }); }
VecN RobotModel::upper_limits() const { return collect(*this, [](auto& j) { return j.upper; }); }
VecN RobotModel::effort_limits() const { return collect(*this, [](auto& j) { return j.effort_limit; }); }
VecN RobotModel::velocity_limits() const {
  return collect(*this, [](auto& j) { return j.velocity_limit; });
}
VecN RobotModel::armature() const { return collect(*this, [](auto& j) { return j.armature; }); }

bool is_physical(double mass, const Mat3& inertia, double tol) {
  if (!(mass > 0.0) || !inertia.allFinite()) return false;
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + inertia.norm())) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia, Eigen::EigenvaluesOnly);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev[0] > 0.0)) return false;
  return ev[0] + ev[1] + tol >= ev[2];
}

void RobotModel::validate() const {
  const int n = dof();
  if (n < 1 || n > kMaxDof) {
    throw ContractError("model '" + name + "': joint count " + std::to_string(n) +
                        " outside [1, " + std::to_string(kMaxDof) + "]");
  }
  if (static_cast<int>(links.size()) != n) {
    throw ContractError("model '" + name + "': link count does not match joint count");
  }
  for (int i = 0; i < n; ++i) {
    const auto& j = joints[i];
    if (std::abs(j.axis.norm() - 1.0) > 1e-12) {
      throw ContractError("joint '" + j.name + "': axis is not a unit vector");
    }
    if (!(j.lower < j.upper)) throw ContractError("joint '" + j.name + "': lower >= upper");
    if (!(j.velocity_limit > 0.0) || !(j.effort_limit > 0.0)) {
      throw ContractError("joint '" + j.name + "': limits must be positive");
    }
    if (j.armature < 0.0) throw ContractError("joint '" + j.name + "': negative armature");
    if (!is_physical(links[i].mass, links[i].inertia)) {
      throw ContractError("link " + std::to_string(i + 1) +
                          ": non-physical inertial parameters (mass > 0, SPD inertia, "
                          "triangle inequality)");
    }
  }
  if (home.size() != 0 && home.size() != n) {
    throw ContractError("model '" + name + "': home vector has wrong length");
  }
}

namespace {

Transform read_origin(const YAML::Node& node) {
  yaml::check_keys(node, {"xyz", "rpy"});
  return Transform::from_xyz_rpy(yaml::vec3(yaml::require(node, "xyz")),
                                 node["rpy"] ? yaml::vec3(node["rpy"]) : Vec3::Zero());
}

}  // namespace

RobotModel parse_model(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw FormatError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw FormatError("model document must be a mapping", 1);
  yaml::check_keys(root, {"name", "version", "gravity", "home", "ee", "joints"});

  RobotModel m;
  m.name = yaml::get<std::string>(root, "name", "unnamed");
  m.version = yaml::get<int>(root, "version", 1);
  if (root["gravity"]) m.gravity = yaml::vec3(root["gravity"]);
  if (root["ee"]) m.ee = read_origin(root["ee"]);

  const YAML::Node joints = yaml::require(root, "joints");
  if (!joints.IsSequence() || joints.size() == 0) {
    throw FormatError("'joints' must be a non-empty sequence", yaml::line(joints));
  }
  if (static_cast<int>(joints.size()) > kMaxDof) {
    throw FormatError("too many joints (max " + std::to_string(kMaxDof) + ")",
                      yaml::line(joints));
  }
  for (const auto& jn : joints) {
    yaml::check_keys(jn, {"name", "origin", "axis", "limits", "armature", "link"});
    JointSpec j;
    j.name = yaml::get<std::string>(jn, "name", "joint" + std::to_string(m.joints.size() + 1));
    if (jn["origin"]) j.origin = read_origin(jn["origin"]);
    j.axis = yaml::vec3(yaml::require(jn, "axis"));
    if (std::abs(j.axis.norm() - 1.0) > 1e-12) {
      throw FormatError("joint '" + j.name + "': axis must be a unit vector",
                        yaml::line(jn["axis"]));
    }
    const YAML::Node lim = yaml::require(jn, "limits");
    yaml::check_keys(lim, {"lower", "upper", "velocity", "effort"});
    j.lower = yaml::get<double>(lim, "lower");
    j.upper = yaml::get<double>(lim, "upper");
    j.velocity_limit = yaml::get<double>(lim, "velocity");
    j.effort_limit = yaml::get<double>(lim, "effort");
    if (!(j.lower < j.upper) || !(j.velocity_limit > 0) || !(j.effort_limit > 0)) {
      throw FormatError("joint '" + j.name + "': inconsistent limits", yaml::line(lim));
    }
    j.armature = yaml::get<double>(jn, "armature", 0.0);
    if (j.armature < 0) throw FormatError("negative armature", yaml::line(jn["armature"]));

    const YAML::Node ln = yaml::require(jn, "link");
    yaml::check_keys(ln, {"mass", "com", "inertia"});
    LinkInertia link;
    link.mass = yaml::get<double>(ln, "mass");
    link.com = yaml::vec3(yaml::require(ln, "com"));
    const auto in = yaml::vector(yaml::require(ln, "inertia"), 6);
    link.inertia << in[0], in[1], in[2], in[1], in[3], in[4], in[2], in[4], in[5];
    if (!(link.mass > 0.0)) {
      throw FormatError("joint '" + j.name + "': link mass must be positive", yaml::line(ln["mass"]));
    }
    if (!is_physical(link.mass, link.inertia)) {
      throw FormatError("joint '" + j.name +
                            "': link inertia must be positive definite and satisfy the "
                            "triangle inequality",
                        yaml::line(ln["inertia"]));
    }
    m.joints.push_back(j);
    m.links.push_back(link);
  }
  if (root["home"]) {
    const auto h = yaml::vector(root["home"], m.joints.size());
    m.home = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<int>(h.size()));
  } else {
    m.home = VecN::Zero(m.dof());
  }
  try {
    m.validate();
  } catch (const ContractError& e) {
    throw FormatError(e.what(), 1);
  }
  return m;
}

RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_model(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string dump_model(const RobotModel& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto v3 = [&](const Vec3& v) { os << "[" << v.x() << ", " << v.y() << ", " << v.z() << "]"; };
  auto origin = [&](const Transform& t) {
    os << "{xyz: ";
    v3(t.translation);
    os << ", rpy: ";
    v3(rpy_of(t.rotation));
    os << "}";
  };
  os << "name: " << m.name << "\nversion: " << m.version << "\ngravity: ";
  v3(m.gravity);
  os << "\nhome: [";
  for (int i = 0; i < m.home.size(); ++i) os << (i ? ", " : "") << m.home[i];
  os << "]\nee: ";
  origin(m.ee);
  os << "\njoints:\n";
  for (int i = 0; i < m.dof(); ++i) {
    const auto& j = m.joints[i];
    const auto& l = m.links[i];
    os << "  - name: " << j.name << "\n    origin: ";
    origin(j.origin);
    os << "\n    axis: ";
    v3(j.axis);
    os << "\n    limits: {lower: " << j.lower << ", upper: " << j.upper
       << ", velocity: " << j.velocity_limit << ", effort: " << j.effort_limit << "}\n";
    os << "    armature: " << j.armature << "\n    link:\n      mass: " << l.mass << "\n      com: ";
    v3(l.com);
    const auto& I = l.inertia;
    os << "\n      inertia: [" << I(0, 0) << ", " << I(0, 1) << ", " << I(0, 2) << ", " << I(1, 1)
       << ", " << I(1, 2) << ", " << I(2, 2) << "]\n";
  }
  return os.str();
}

void save_model(const RobotModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file '" + path + "'");
  out << dump_model(model);
}

const RobotModel& default_model() {
  static const RobotModel model = parse_model(kDefaultModelText);
  return model;
}

}  // namespace mmctl
