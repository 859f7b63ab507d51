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

#include "mmctl/plant.hpp"

#include <cmath>
#include <string>

namespace mmctl {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

void check_factors(const std::vector<double>& f, int links, const char* what) {
  if (f.empty()) return;
  if (static_cast<int>(f.size()) != links) {
    throw ContractError(std::string("perturb: ") + what + " needs one factor per link");
  }
  for (double v : f) {
    if (!(v >= kMinPerturbation && v <= kMaxPerturbation)) {
      throw ContractError(std::string("perturb: ") + what + " factor outside [0.5, 2]");
    }
  }
}

double factor(const std::vector<double>& f, int i) { return f.empty() ? 1.0 : f[i]; }

}  // namespace

void ContactParams::validate() const {
  if (!(stiffness >= 0.0) || !(damping >= 0.0) || !(friction >= 0.0)) {
    throw ContractError("contact: stiffness, damping and friction must be non-negative");
  }
}

void NoiseConfig::validate() const {
  if (!(q >= 0.0) || !(qd >= 0.0) || !(tau >= 0.0) || !(force >= 0.0)) {
    throw ContractError("noise: standard deviations must be non-negative");
  }
}

bool Perturbation::identity() const {
  auto ones = [](const std::vector<double>& f) {
    for (double v : f) {
      if (v != 1.0) return false;
    }
    return true;
  };
  return ones(mass) && ones(com) && ones(inertia);
}

RobotModel perturb(const RobotModel& model, const Perturbation& p) {
  const int n = static_cast<int>(model.links.size());
  check_factors(p.mass, n, "mass");
  check_factors(p.com, n, "com");
  check_factors(p.inertia, n, "inertia");
  RobotModel out = model;
  for (int i = 0; i < n; ++i) {
    const LinkInertia& src = model.links[i];
    LinkInertia& l = out.links[i];
    const double fc = factor(p.com, i);
    if (fc != 1.0) {
      // Hold the inertia about the link origin while the COM moves.
      const Mat3 origin = src.inertia + src.mass * skew(src.com).transpose() * skew(src.com);
      l.com = fc * src.com;
      l.inertia = origin - src.mass * skew(l.com).transpose() * skew(l.com);
    }
    l.inertia *= factor(p.inertia, i);
    l.mass = src.mass * factor(p.mass, i);
    if (!is_physical(l.mass, l.inertia)) {
      throw ContractError("perturb: link " + std::to_string(i + 1) + " becomes non-physical");
    }
  }
  return out;
}

void WorldConfig::validate() const {
  if (!(dt > 0.0)) throw ContractError("world: step must be positive");
  if (robots.empty()) throw ContractError("world: at least one robot required");
  for (const auto& pl : planes) {
    pl.params.validate();
    if (std::abs(pl.normal.norm() - 1.0) > 1e-9) throw ContractError("world: plane normal must be unit");
  }
  if (box) {
    box->params.validate();
    if (!(box->mass > 0.0) || (box->half_extents.array() <= 0.0).any()) {
      throw ContractError("world: box needs positive mass and extents");
    }
  }
  for (const auto& r : robots) {
    r.noise.validate();
    if (r.command_delay < 0) throw ContractError("world: command delay must be >= 0");
    if (!(r.read_phase >= 0.0 && r.read_phase < dt)) {
      throw ContractError("world: read phase must lie in [0, dt)");
    }
    const int n = r.physics.dof();
    if (r.estimator.dof() != n) throw ContractError("world: estimator model dof mismatch");
    if (r.q0.size() != n || r.qd0.size() != n) throw ContractError("world: initial state size");
    const Mat3& R = r.base.rotation;
    if (std::abs(R(2, 2) - 1.0) > 1e-12) throw ContractError("world: base may only rotate about z");
  }
}

Vec3 penalty_force(const ContactParams& p, double depth, const Vec3& n, const Vec3& v) {
  if (!(depth > 0.0)) return Vec3::Zero();
  const double vn = v.dot(n);
  const double fn = std::max(0.0, p.stiffness * depth - p.damping * vn);
  Vec3 ft = -p.damping * (v - vn * n);
  const double cap = p.friction * fn;
  const double t = ft.norm();
  if (t > cap) ft *= t > 0.0 ? cap / t : 0.0;
  return fn * n + ft;
}

World::World(WorldConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.box) box_ = BoxState{cfg_.box->center, Vec3::Zero()};
  robots_.resize(cfg_.robots.size());
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    Robot& r = robots_[i];
    r.cfg = cfg_.robots[i];
    r.q = r.cfg.q0;
    r.qd = r.cfg.qd0;
    r.rng.seed(cfg_.seed * 0x9E3779B97F4A7C15ull + i);
    const int n = r.cfg.physics.dof();
    // The arm was holding itself before the run started.
    const VecN hold = gravity_torque(r.cfg.estimator, r.q);
    r.delay.assign(r.cfg.command_delay + 1, hold);
    r.tau_applied = hold;
    r.tau_contact = VecN::Zero(n);
    r.out.read_time = -cfg_.dt + r.cfg.read_phase;
    sense(r);
  }
}

bool World::faulted() const {
  for (const auto& r : robots_) {
    if (r.fault) return true;
  }
  return false;
}

Vec3 World::contact_on_point(const Vec3& p, const Vec3& v, Vec3* box_force, bool* touching) const {
  Vec3 f = Vec3::Zero();
  for (const auto& pl : cfg_.planes) {
    const double depth = -(p - pl.point).dot(pl.normal);
    if (depth > 0.0) {
      f += penalty_force(pl.params, depth, pl.normal, v);
      *touching = true;
    }
  }
  if (box_) {
    const Vec3& h = cfg_.box->half_extents;
    const Vec3 d = p - box_->position;
    if ((d.array().abs() < h.array()).all()) {
      int axis = 0;
      double depth = h[0] - std::abs(d[0]);
      for (int k = 1; k < 3; ++k) {
        const double pen = h[k] - std::abs(d[k]);
        if (pen < depth) {
          depth = pen;
          axis = k;
        }
      }
      Vec3 n = Vec3::Zero();
      n[axis] = d[axis] >= 0.0 ? 1.0 : -1.0;
      const Vec3 fb = penalty_force(cfg_.box->params, depth, n, v - box_->velocity);
      f += fb;
      *box_force -= fb;
      *touching = true;
    }
  }
  return f;
}

void World::step(std::span<const VecN> tau_cmd) {
  if (tau_cmd.size() != robots_.size()) throw ContractError("world: one command per robot");
  const double dt = cfg_.dt;
  Vec3 box_force = Vec3::Zero();

  // Contact forces from the state at the start of the step.
  for (std::size_t i = 0; i < robots_.size(); ++i) {
    Robot& r = robots_[i];
    const int n = r.cfg.physics.dof();
    if (tau_cmd[i].size() != n || !tau_cmd[i].allFinite()) {
      throw ContractError("world: command must be finite with one entry per joint");
    }
    r.delay[r.delay_head] = tau_cmd[i];
    r.delay_head = (r.delay_head + 1) % static_cast<int>(r.delay.size());
    r.tau_applied = r.delay[r.delay_head];
    r.step_flags = 0;

    const ChainFrames f = compute_frames(r.cfg.physics, r.q);
    const Jac3 Jp = point_jacobian(f, f.n + 1, f.ee.translation);
    const Mat3& R = r.cfg.base.rotation;
    const Vec3 p = r.cfg.base.apply(f.ee.translation);
    const Vec3 v = R * (Jp * r.qd);
    bool touching = false;
    r.f_world = contact_on_point(p, v, &box_force, &touching);
    if (touching) r.step_flags |= kPlantContact;
    r.tau_contact.noalias() = Jp.transpose() * (R.transpose() * r.f_world);
  }

  for (Robot& r : robots_) {
    if (r.fault) continue;
    const RobotModel& m = r.cfg.physics;
    const VecN qdd = forward_dynamics(m, r.q, r.qd, r.tau_applied + r.tau_contact);
    VecN qd = r.qd + dt * qdd;
    VecN q = r.q + dt * qd;
    for (int j = 0; j < m.dof(); ++j) {
      if (q[j] < m.joints[j].lower) {
        q[j] = m.joints[j].lower;
        qd[j] = 0.0;
        r.step_flags |= kPlantJointLimit;
      } else if (q[j] > m.joints[j].upper) {
        q[j] = m.joints[j].upper;
        qd[j] = 0.0;
        r.step_flags |= kPlantJointLimit;
      }
    }
    if (!qd.allFinite() || !q.allFinite() || qd.norm() > cfg_.divergence_limit) {
      r.fault = true;
      r.qd.setZero();
      continue;
    }
    r.q = q;
    r.qd = qd;
  }

  if (box_) {
    const BoxConfig& b = *cfg_.box;
    Vec3 f = box_force + b.mass * Vec3(0.0, 0.0, -9.81);
    for (const auto& pl : cfg_.planes) {
      // Deepest box corner along the plane normal.
      const Vec3 support = box_->position - b.half_extents.cwiseProduct(pl.normal.cwiseSign());
      const double depth = -(support - pl.point).dot(pl.normal);
      if (depth > 0.0) f += penalty_force(pl.params, depth, pl.normal, box_->velocity);
    }
    box_->velocity += dt * f / b.mass;
    box_->position += dt * box_->velocity;
  }

  ++tick_;
  for (Robot& r : robots_) {
    r.out.read_time = (tick_ - 1) * dt + r.cfg.read_phase;
    sense(r);
  }
}

void World::sense(Robot& r) {
  const NoiseConfig& nz = r.cfg.noise;
  const int n = r.cfg.physics.dof();
  std::normal_distribution<double> gauss(0.0, 1.0);
  PlantOutput& o = r.out;
  o.tick = tick_;
  o.state_true.timestamp = tick_ * cfg_.dt;
  o.state_true.q = r.q;
  o.state_true.qd = r.qd;
  o.state_true.qdd = VecN::Zero(n);
  o.tau_true = r.tau_applied;
  o.state = o.state_true;
  o.tau_meas = r.tau_applied;
  for (int j = 0; j < n; ++j) o.state.q[j] += nz.q * gauss(r.rng);
  for (int j = 0; j < n; ++j) o.state.qd[j] += nz.qd * gauss(r.rng);
  for (int j = 0; j < n; ++j) o.tau_meas[j] += nz.tau * gauss(r.rng);

  const Mat3 Rt = r.cfg.base.rotation.transpose();
  o.F_true.head<3>() = -(Rt * r.f_world);
  o.F_true.tail<3>().setZero();

  const RobotModel& est = r.cfg.estimator;
  const ChainFrames f = compute_frames(est, o.state.q);
  const VecN zero = VecN::Zero(n);
  const VecN model_tau = rnea(est, f, o.state.qd, zero, true);
  const JacPinv pinv = damped_pinv(jacobian(f));
  o.F_EE = pinv.transpose() * (o.tau_meas - model_tau);
  for (int k = 0; k < 6; ++k) o.F_EE[k] += nz.force * gauss(r.rng);

  o.flags = r.step_flags | (r.fault ? kPlantFault : 0u);
}

}  // namespace mmctl
