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

#include "mmctl/controllet.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace mmctl {

ControlletType parse_controllet_type(std::string_view s) {
  if (s == "joint_impedance") return ControlletType::kJointImpedance;
  if (s == "cartesian" || s == "dual_cartesian") return ControlletType::kCartesian;
  if (s == "coupled_cartesian") return ControlletType::kCoupledCartesian;
  if (s == "ufic") return ControlletType::kUfic;
  if (s == "coupled_ufic") return ControlletType::kCoupledUfic;
  throw ContractError("unknown controllet type '" + std::string(s) + "'");
}

const char* to_string(ControlletType t) {
  switch (t) {
    case ControlletType::kJointImpedance:
      return "joint_impedance";
    case ControlletType::kCartesian:
      return "dual_cartesian";
    case ControlletType::kCoupledCartesian:
      return "coupled_cartesian";
    case ControlletType::kUfic:
      return "ufic";
    case ControlletType::kCoupledUfic:
      return "coupled_ufic";
  }
  return "?";
}

void ControlletDescriptor::validate(int robot_count) const {
  if (name.empty()) throw ContractError("controllet: empty name");
  if (robots.empty()) throw ContractError("controllet " + name + ": claims no robots");
  std::set<int> seen;
  for (int r : robots) {
    if (r < 0 || r >= robot_count) {
      throw ContractError("controllet " + name + ": robot id " + std::to_string(r) + " out of range");
    }
    if (!seen.insert(r).second) {
      throw ContractError("controllet " + name + ": robot " + std::to_string(r) + " claimed twice");
    }
  }
  const bool coupled =
      type == ControlletType::kCoupledCartesian || type == ControlletType::kCoupledUfic;
  if (coupled && robots.size() != 2) {
    throw ContractError("controllet " + name + ": coupled types need exactly two robots");
  }
  if ((params.K_c.array() < 0).any() || params.K_N < 0 ||
      (params.D_c && (params.D_c->array() < 0).any()) || (params.D_N && *params.D_N < 0)) {
    throw ContractError("controllet " + name + ": gains must be non-negative");
  }
  if ((params.joint_stiffness.array() < 0).any() || (params.joint_damping.array() < 0).any()) {
    throw ContractError("controllet " + name + ": joint gains must be non-negative");
  }
  if (!(params.manipulability.k_m >= 0) || !(params.manipulability.m_0 > 0)) {
    throw ContractError("controllet " + name + ": need k_m >= 0 and m_0 > 0");
  }
  if (collision_avoidance) {
    params.collision.validate();
    if (robots.size() < 2 && params.collision.self_pairs.empty()) {
      throw ContractError("controllet " + name + ": collision avoidance needs two robots or self pairs");
    }
  }
  params.ufic.validate();
}

Controllet::Controllet(ControlletDescriptor d) : desc_(std::move(d)) {}

void Controllet::add_param(std::string name, double* value, double min_value) {
  params_.push_back({std::move(name), value, min_value});
}

int Controllet::param_id(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> Controllet::param_names() const {
  std::vector<std::string> out;
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

bool Controllet::param_valid(int id, double value) const {
  return id >= 0 && id < static_cast<int>(params_.size()) && std::isfinite(value) &&
         value >= params_[id].min_value;
}

void Controllet::apply_param(int id, double value) {
  if (!param_valid(id, value)) return;
  *params_[id].value = value;
  params_changed();
}

double Controllet::param(int id) const { return *params_.at(id).value; }

namespace {

constexpr double kMinPositive = 1e-9;

const char* const kAxis[6] = {"0", "1", "2", "3", "4", "5"};

class JointImpedance final : public Controllet {
 public:
  JointImpedance(ControlletDescriptor d, const SharedRobotBus& bus) : Controllet(std::move(d)) {
    for (int r : desc_.robots) {
      if (bus.robot(r).model->dof() != desc_.params.joint_stiffness.size() ||
          bus.robot(r).model->dof() != desc_.params.joint_damping.size()) {
        throw ContractError("controllet " + desc_.name + ": joint gains need one entry per joint");
      }
    }
    for (int j = 0; j < desc_.params.joint_stiffness.size(); ++j) {
      add_param(std::string("k.") + kAxis[std::min(j, 5)] + (j > 5 ? std::to_string(j) : ""),
                &desc_.params.joint_stiffness[j], 0.0);
    }
    for (int j = 0; j < desc_.params.joint_damping.size(); ++j) {
      add_param(std::string("d.") + kAxis[std::min(j, 5)] + (j > 5 ? std::to_string(j) : ""),
                &desc_.params.joint_damping[j], 0.0);
    }
  }

  void activate(SharedRobotBus&) override {}

  void compute(SharedRobotBus& bus, double) override {
    const VecN& k = desc_.params.joint_stiffness;
    const VecN& d = desc_.params.joint_damping;
    for (int r : desc_.robots) {
      RobotSlot& s = bus.robot(r);
      const int n = s.model->dof();
      s.terms.reset(n);
      s.terms.task = k.cwiseProduct(s.target.q - s.state.q) + d.cwiseProduct(s.target.qd - s.state.qd);
      s.terms.cor = s.dyn.c_qd + s.dyn.g;
    }
  }
};

class CartesianFamily final : public Controllet {
 public:
  CartesianFamily(ControlletDescriptor d, const SharedRobotBus& bus) : Controllet(std::move(d)) {
    const auto t = desc_.type;
    coupled_ = t == ControlletType::kCoupledCartesian || t == ControlletType::kCoupledUfic;
    force_ = t == ControlletType::kUfic || t == ControlletType::kCoupledUfic;
    const std::size_t m = desc_.robots.size();
    gains_.resize(m);
    ufic_.resize(m);
    grasp_.assign(m, Quat::Identity());
    bodies_.resize(m);
    ca_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const RobotModel& model = *bus.robot(desc_.robots[j]).model;
      if (desc_.params.q_dN && desc_.params.q_dN->size() != model.dof()) {
        throw ContractError("controllet " + desc_.name + ": q_dN size mismatch");
      }
      gains_[j] = make_impedance_gains(model);
      ca_[j] = VecN::Zero(model.dof());
    }
    if (desc_.collision_avoidance) {
      collision_ = CollisionAvoidance(desc_.params.collision, static_cast<int>(m));
    }

    ControlletParams& p = desc_.params;
    for (int i = 0; i < 6; ++i) add_param(std::string("K_c.") + kAxis[i], &p.K_c[i], 0.0);
    add_param("K_N", &p.K_N, 0.0);
    add_param("collision.threshold", &p.collision.threshold, kMinPositive);
    add_param("collision.gain", &p.collision.gain, 0.0);
    add_param("manipulability.k_m", &p.manipulability.k_m, 0.0);
    add_param("manipulability.m_0", &p.manipulability.m_0, kMinPositive);
    if (coupled_) add_param("pair_offset", &p.pair_offset, 0.0);
    if (force_) {
      for (int i = 0; i < 6; ++i) add_param(std::string("K_p.") + kAxis[i], &p.ufic.K_p[i], 0.0);
      for (int i = 0; i < 6; ++i) add_param(std::string("K_i.") + kAxis[i], &p.ufic.K_i[i], 0.0);
      for (int i = 0; i < 6; ++i) add_param(std::string("K_d.") + kAxis[i], &p.ufic.K_d[i], 0.0);
      add_param("d_max", &p.ufic.d_max, kMinPositive);
    }
    params_changed();
  }

  void activate(SharedRobotBus& bus) override {
    for (std::size_t j = 0; j < desc_.robots.size(); ++j) {
      const RobotSlot& s = bus.robot(desc_.robots[j]);
      if (force_) ufic_[j] = ufic_init(desc_.params.ufic);
      if (coupled_) {
        const Quat goal = bus.robot(desc_.robots[0]).target.pose.orientation;
        const Quat ee = Quat(s.base.rotation) * s.dyn.x.orientation;
        grasp_[j] = (goal.conjugate() * ee).normalized();
      }
    }
  }

  const UficState* force_state(std::size_t j) const override {
    return force_ && j < ufic_.size() ? &ufic_[j] : nullptr;
  }

  void compute(SharedRobotBus& bus, double dt) override {
    const ControlletParams& p = desc_.params;
    const std::size_t m = desc_.robots.size();
    CartesianState pair_a, pair_b;
    if (coupled_) {
      std::tie(pair_a, pair_b) = cdc_goal_split(bus.robot(desc_.robots[0]).target.pose, p.pair_offset);
    }

    for (std::size_t j = 0; j < m; ++j) {
      RobotSlot& s = bus.robot(desc_.robots[j]);
      const RobotModel& model = *s.model;
      const DynamicsTerms& dyn = s.dyn;
      s.terms.reset(model.dof());

      CartesianState goal = s.target.pose;
      if (coupled_) {
        goal = j == 0 ? pair_a : pair_b;
        goal.orientation = goal.orientation * grasp_[j];
      }
      const Mat3& R = s.base.rotation;
      CartesianState goal_b;
      goal_b.position = R.transpose() * (goal.position - s.base.translation);
      goal_b.orientation = Quat(R.transpose()) * goal.orientation;

      const Vec6 e = pose_error(dyn.x, goal_b);
      const ImpedanceGains& g = gains_[j];
      Vec6 w = -g.K_c.cwiseProduct(e) - g.D_c.cwiseProduct(dyn.x.twist);

      if (force_) {
        UficState& st = ufic_[j];
        CartesianState x_w;
        x_w.position = s.base.apply(dyn.x.position);
        x_w.twist.head<3>() = R * dyn.x.twist.head<3>();
        x_w.twist.tail<3>() = R * dyn.x.twist.tail<3>();
        Vec6 F_w;
        F_w.head<3>() = R * s.F_ext.head<3>();
        F_w.tail<3>() = R * s.F_ext.tail<3>();
        const UficOutput out = ufic_wrench(st, p.ufic, s.target.wrench, F_w, x_w, dt);
        st = out.state;
        // Target shaping x_d' = x_d + alpha_i (x_d - x) adds -alpha_i K_c e.
        const Vec6 shaping = -st.alpha_i * g.K_c.cwiseProduct(e);
        w += drain_impedance_tank(st, p.ufic, shaping, dyn.x.twist, dt);
        w.head<3>() += R.transpose() * out.wrench.head<3>();
        w.tail<3>() += R.transpose() * out.wrench.tail<3>();
        if (st.underflow) s.flags |= kFlagTankUnderflow;
        if (st.contact_latched) s.flags |= kFlagContactLatched;
      }

      s.terms.task.noalias() = dyn.J.transpose() * w;
      if (g.feedforward) {
        s.terms.task += impedance_feedforward(dyn, Vec6::Zero(), Vec6::Zero());
      }
      s.terms.null = nullspace_torque(dyn, s.state, g);
      s.terms.cor = dyn.c_qd + dyn.g;
      if (desc_.manipulability) {
        const ManipulabilityTorque mt = manipulability_torque(model, s.state.q, p.manipulability);
        s.terms.ma = mt.tau;
        if (mt.flagged || mt.m_kin <= p.manipulability.m_0) s.flags |= kFlagManipulability;
      }
    }

    if (desc_.collision_avoidance) {
      for (std::size_t j = 0; j < m; ++j) {
        const RobotSlot& s = bus.robot(desc_.robots[j]);
        bodies_[j] = {s.model, &s.frames, s.base};
        ca_[j].setZero();
      }
      const unsigned flags = collision_.accumulate(bodies_, ca_);
      for (std::size_t j = 0; j < m; ++j) {
        RobotSlot& s = bus.robot(desc_.robots[j]);
        s.terms.ca = ca_[j];
        if (flags & kCollisionActive) s.flags |= kFlagCollisionActive;
        if (flags & (kCollisionFallbackAxis | kCollisionFallbackPrevious)) {
          s.flags |= kFlagCollisionFallback;
        }
      }
    }
  }

 protected:
  void params_changed() override {
    const ControlletParams& p = desc_.params;
    for (std::size_t j = 0; j < gains_.size(); ++j) {
      ImpedanceGains& g = gains_[j];
      g.K_c = p.K_c;
      g.D_c = p.D_c ? *p.D_c : critical_damping(p.K_c);
      g.K_N.setConstant(p.K_N);
      g.D_N.setConstant(p.D_N ? *p.D_N : 2.0 * std::sqrt(p.K_N));
      if (p.q_dN) g.q_dN = *p.q_dN;
      g.feedforward = p.feedforward;
    }
    if (desc_.collision_avoidance) {
      collision_.set_response(p.collision.threshold, p.collision.gain);
    }
  }

 private:
  bool coupled_ = false;
  bool force_ = false;
  std::vector<ImpedanceGains> gains_;
  std::vector<UficState> ufic_;
  std::vector<Quat> grasp_;
  CollisionAvoidance collision_;
  std::vector<CollisionBody> bodies_;
  std::vector<VecN> ca_;
};

}  // namespace

std::unique_ptr<Controllet> make_controllet(const ControlletDescriptor& d, const SharedRobotBus& bus) {
  d.validate(bus.size());
  if (d.type == ControlletType::kJointImpedance) return std::make_unique<JointImpedance>(d, bus);
  return std::make_unique<CartesianFamily>(d, bus);
}

}  // namespace mmctl
