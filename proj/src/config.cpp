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

#include "mmctl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mmctl/yaml_util.hpp"

namespace mmctl {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFacingOffset = 0.457;  // m from the world origin to each base

Vec6 vec6(const YAML::Node& v) {
  const auto d = yaml::vector(v, 6);
  Vec6 out;
  for (int i = 0; i < 6; ++i) out[i] = d[i];
  return out;
}

VecN vecn(const YAML::Node& v) {
  const auto d = yaml::vector(v);
  if (d.empty() || static_cast<int>(d.size()) > kMaxDof) {
    throw FormatError("expected 1 to " + std::to_string(kMaxDof) + " numbers", yaml::line(v));
  }
  VecN out(static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<int>(i)] = d[i];
  return out;
}

std::vector<int> ints(const YAML::Node& v) {
  if (!v.IsSequence()) throw FormatError("expected a sequence of integers", yaml::line(v));
  std::vector<int> out;
  for (const auto& e : v) out.push_back(yaml::as<int>(e, "integer"));
  return out;
}

std::vector<std::string> strings(const YAML::Node& v) {
  if (!v.IsSequence()) throw FormatError("expected a sequence of names", yaml::line(v));
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(yaml::as<std::string>(e, "name"));
  return out;
}

// Axis mask as six booleans or a list of axis names (x y z rx ry rz).
std::array<bool, 6> axes(const YAML::Node& v) {
  static const char* names[] = {"x", "y", "z", "rx", "ry", "rz"};
  if (!v.IsSequence()) throw FormatError("expected a sequence of axes", yaml::line(v));
  std::array<bool, 6> out{};
  if (v.size() == 6 && v[0].IsScalar() && (v[0].as<std::string>() == "true" || v[0].as<std::string>() == "false")) {
    for (int i = 0; i < 6; ++i) out[i] = yaml::as<bool>(v[i], "force_axes");
    return out;
  }
  for (const auto& e : v) {
    const auto s = yaml::as<std::string>(e, "force_axes");
    bool found = false;
    for (int i = 0; i < 6; ++i) {
      if (s == names[i]) out[i] = found = true;
    }
    if (!found) throw FormatError("unknown axis '" + s + "' (x, y, z, rx, ry, rz)", yaml::line(e));
  }
  return out;
}

template <typename F>
void wrap(const YAML::Node& node, F&& f) {
  try {
    f();
  } catch (const ContractError& e) {
    throw FormatError(e.what(), yaml::line(node));
  }
}

void read_task(const YAML::Node& n, TaskSpec& t) {
  yaml::check_keys(n, {"id", "joint_amplitude", "joint_frequency", "circle_radius", "circle_period",
                       "force_peak", "force_period", "contact_force", "contact_radius", "contact_period",
                       "squeeze", "lift", "lift_period", "coupled"});
  t.joint_amplitude = yaml::get(n, "joint_amplitude", t.joint_amplitude);
  t.joint_frequency = yaml::get(n, "joint_frequency", t.joint_frequency);
  t.circle_radius = yaml::get(n, "circle_radius", t.circle_radius);
  t.circle_period = yaml::get(n, "circle_period", t.circle_period);
  t.force_peak = yaml::get(n, "force_peak", t.force_peak);
  t.force_period = yaml::get(n, "force_period", t.force_period);
  t.contact_force = yaml::get(n, "contact_force", t.contact_force);
  t.contact_radius = yaml::get(n, "contact_radius", t.contact_radius);
  t.contact_period = yaml::get(n, "contact_period", t.contact_period);
  t.squeeze = yaml::get(n, "squeeze", t.squeeze);
  t.lift = yaml::get(n, "lift", t.lift);
  t.lift_period = yaml::get(n, "lift_period", t.lift_period);
  t.coupled = yaml::get(n, "coupled", t.coupled);
}

void read_ufic(const YAML::Node& n, UficGains& g) {
  yaml::check_keys(n, {"K_p", "K_d", "K_i", "F_d", "F_ff", "force_axes", "d_max", "E_min", "E_max",
                       "integral_limit", "contact_threshold", "tank_fade", "tank_gain"});
  if (n["K_p"]) g.K_p = vec6(n["K_p"]);
  if (n["K_d"]) g.K_d = vec6(n["K_d"]);
  if (n["K_i"]) g.K_i = vec6(n["K_i"]);
  if (n["F_d"]) g.F_d = vec6(n["F_d"]);
  if (n["F_ff"]) g.F_ff = vec6(n["F_ff"]);
  if (n["force_axes"]) g.force_axes = axes(n["force_axes"]);
  g.d_max = yaml::get(n, "d_max", g.d_max);
  g.E_min = yaml::get(n, "E_min", g.E_min);
  g.E_max = yaml::get(n, "E_max", g.E_max);
  g.integral_limit = yaml::get(n, "integral_limit", g.integral_limit);
  g.contact_threshold = yaml::get(n, "contact_threshold", g.contact_threshold);
  g.tank_fade = yaml::get(n, "tank_fade", g.tank_fade);
  g.tank_gain = yaml::get(n, "tank_gain", g.tank_gain);
}

void read_collision(const YAML::Node& n, CollisionConfig& c) {
  yaml::check_keys(n, {"anchors", "threshold", "gain", "self_pairs"});
  if (n["anchors"]) c.anchors = ints(n["anchors"]);
  c.threshold = yaml::get(n, "threshold", c.threshold);
  c.gain = yaml::get(n, "gain", c.gain);
  if (n["self_pairs"]) {
    const auto& sp = n["self_pairs"];
    if (!sp.IsSequence()) throw FormatError("expected a sequence of index pairs", yaml::line(sp));
    c.self_pairs.clear();
    for (const auto& e : sp) {
      const auto p = ints(e);
      if (p.size() != 2) throw FormatError("expected a pair of segment indices", yaml::line(e));
      c.self_pairs.emplace_back(p[0], p[1]);
    }
  }
}

ControlletDescriptor read_controllet(const YAML::Node& n) {
  yaml::check_keys(n, {"name", "type", "robots", "collision_avoidance", "manipulability", "K_c", "D_c",
                       "K_N", "D_N", "q_dN", "feedforward", "joint_stiffness", "joint_damping", "ufic",
                       "collision", "manipulability_gains", "pair_offset"});
  ControlletDescriptor d;
  d.name = yaml::get<std::string>(n, "name");
  wrap(n["type"], [&] { d.type = parse_controllet_type(yaml::get<std::string>(n, "type")); });
  d.robots = ints(yaml::require(n, "robots"));
  d.collision_avoidance = yaml::get(n, "collision_avoidance", false);
  d.manipulability = yaml::get(n, "manipulability", false);
  ControlletParams& p = d.params;
  if (n["K_c"]) p.K_c = vec6(n["K_c"]);
  if (n["D_c"]) p.D_c = vec6(n["D_c"]);
  p.K_N = yaml::get(n, "K_N", p.K_N);
  if (n["D_N"]) p.D_N = yaml::get<double>(n, "D_N");
  if (n["q_dN"]) p.q_dN = vecn(n["q_dN"]);
  p.feedforward = yaml::get(n, "feedforward", p.feedforward);
  if (n["joint_stiffness"]) p.joint_stiffness = vecn(n["joint_stiffness"]);
  if (n["joint_damping"]) p.joint_damping = vecn(n["joint_damping"]);
  if (n["ufic"]) read_ufic(n["ufic"], p.ufic);
  if (n["collision"]) read_collision(n["collision"], p.collision);
  if (const auto& m = n["manipulability_gains"]) {
    yaml::check_keys(m, {"k_m", "m_0"});
    p.manipulability.k_m = yaml::get(m, "k_m", p.manipulability.k_m);
    p.manipulability.m_0 = yaml::get(m, "m_0", p.manipulability.m_0);
  }
  p.pair_offset = yaml::get(n, "pair_offset", p.pair_offset);
  return d;
}

std::vector<double> factors(const YAML::Node& n) {
  return n ? yaml::vector(n) : std::vector<double>{};
}

void read_side(const YAML::Node& n, PlantSide& s) {
  yaml::check_keys(n, {"perturbation", "noise", "command_delay", "read_phase"});
  if (const auto& p = n["perturbation"]) {
    yaml::check_keys(p, {"mass", "com", "inertia"});
    s.perturbation = {factors(p["mass"]), factors(p["com"]), factors(p["inertia"])};
  }
  if (const auto& z = n["noise"]) {
    yaml::check_keys(z, {"q", "qd", "tau", "force"});
    s.noise.q = yaml::get(z, "q", s.noise.q);
    s.noise.qd = yaml::get(z, "qd", s.noise.qd);
    s.noise.tau = yaml::get(z, "tau", s.noise.tau);
    s.noise.force = yaml::get(z, "force", s.noise.force);
  }
  s.command_delay = yaml::get(n, "command_delay", s.command_delay);
  s.read_phase = yaml::get(n, "read_phase", s.read_phase);
}

void read_plant(const YAML::Node& n, PlantSetup& p) {
  yaml::check_keys(n, {"dt", "contact", "surface", "surface_offset", "box", "box_half_extents", "box_mass",
                       "divergence_limit", "reference", "sim"});
  p.dt = yaml::get(n, "dt", p.dt);
  if (const auto& c = n["contact"]) {
    yaml::check_keys(c, {"stiffness", "damping", "friction"});
    p.contact.stiffness = yaml::get(c, "stiffness", p.contact.stiffness);
    p.contact.damping = yaml::get(c, "damping", p.contact.damping);
    p.contact.friction = yaml::get(c, "friction", p.contact.friction);
  }
  p.surface = yaml::get(n, "surface", p.surface);
  p.surface_offset = yaml::get(n, "surface_offset", p.surface_offset);
  p.box = yaml::get(n, "box", p.box);
  if (n["box_half_extents"]) p.box_half_extents = yaml::vec3(n["box_half_extents"]);
  p.box_mass = yaml::get(n, "box_mass", p.box_mass);
  p.divergence_limit = yaml::get(n, "divergence_limit", p.divergence_limit);
  if (n["reference"]) read_side(n["reference"], p.reference);
  if (n["sim"]) read_side(n["sim"], p.sim);
}

RobotSetup read_robot(const YAML::Node& n) {
  yaml::check_keys(n, {"xyz", "rpy", "q0"});
  RobotSetup r;
  if (n["xyz"]) r.xyz = yaml::vec3(n["xyz"]);
  if (n["rpy"]) r.rpy = yaml::vec3(n["rpy"]);
  if (n["q0"]) r.q0 = vecn(n["q0"]);
  return r;
}

// Flow-style emit helpers.
template <typename V>
void emit_seq(YAML::Emitter& e, const V& v, int n) {
  e << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < n; ++i) e << v[i];
  e << YAML::EndSeq;
}

void emit_vec(YAML::Emitter& e, const char* key, const Eigen::Ref<const Eigen::VectorXd>& v) {
  e << YAML::Key << key << YAML::Value;
  emit_seq(e, v, static_cast<int>(v.size()));
}

void emit_side(YAML::Emitter& e, const char* key, const PlantSide& s) {
  e << YAML::Key << key << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "perturbation" << YAML::Value << YAML::BeginMap;
  auto f = [&](const char* k, const std::vector<double>& v) {
    e << YAML::Key << k << YAML::Value;
    emit_seq(e, v, static_cast<int>(v.size()));
  };
  f("mass", s.perturbation.mass);
  f("com", s.perturbation.com);
  f("inertia", s.perturbation.inertia);
  e << YAML::EndMap;
  e << YAML::Key << "noise" << YAML::Value << YAML::Flow << YAML::BeginMap;
  e << YAML::Key << "q" << YAML::Value << s.noise.q << YAML::Key << "qd" << YAML::Value << s.noise.qd;
  e << YAML::Key << "tau" << YAML::Value << s.noise.tau << YAML::Key << "force" << YAML::Value << s.noise.force;
  e << YAML::EndMap;
  e << YAML::Key << "command_delay" << YAML::Value << s.command_delay;
  e << YAML::Key << "read_phase" << YAML::Value << s.read_phase;
  e << YAML::EndMap;
}

void emit_controllet(YAML::Emitter& e, const ControlletDescriptor& d) {
  const ControlletParams& p = d.params;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << d.name;
  e << YAML::Key << "type" << YAML::Value << to_string(d.type);
  e << YAML::Key << "robots" << YAML::Value;
  emit_seq(e, d.robots, static_cast<int>(d.robots.size()));
  e << YAML::Key << "collision_avoidance" << YAML::Value << d.collision_avoidance;
  e << YAML::Key << "manipulability" << YAML::Value << d.manipulability;
  emit_vec(e, "K_c", p.K_c);
  if (p.D_c) emit_vec(e, "D_c", *p.D_c);
  e << YAML::Key << "K_N" << YAML::Value << p.K_N;
  if (p.D_N) e << YAML::Key << "D_N" << YAML::Value << *p.D_N;
  if (p.q_dN) emit_vec(e, "q_dN", *p.q_dN);
  e << YAML::Key << "feedforward" << YAML::Value << p.feedforward;
  emit_vec(e, "joint_stiffness", p.joint_stiffness);
  emit_vec(e, "joint_damping", p.joint_damping);

  const UficGains& g = p.ufic;
  e << YAML::Key << "ufic" << YAML::Value << YAML::BeginMap;
  emit_vec(e, "K_p", g.K_p);
  emit_vec(e, "K_d", g.K_d);
  emit_vec(e, "K_i", g.K_i);
  emit_vec(e, "F_d", g.F_d);
  emit_vec(e, "F_ff", g.F_ff);
  e << YAML::Key << "force_axes" << YAML::Value;
  emit_seq(e, g.force_axes, 6);
  e << YAML::Key << "d_max" << YAML::Value << g.d_max;
  e << YAML::Key << "E_min" << YAML::Value << g.E_min;
  e << YAML::Key << "E_max" << YAML::Value << g.E_max;
  e << YAML::Key << "integral_limit" << YAML::Value << g.integral_limit;
  e << YAML::Key << "contact_threshold" << YAML::Value << g.contact_threshold;
  e << YAML::Key << "tank_fade" << YAML::Value << g.tank_fade;
  e << YAML::Key << "tank_gain" << YAML::Value << g.tank_gain;
  e << YAML::EndMap;

  const CollisionConfig& c = p.collision;
  e << YAML::Key << "collision" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "anchors" << YAML::Value;
  emit_seq(e, c.anchors, static_cast<int>(c.anchors.size()));
  e << YAML::Key << "threshold" << YAML::Value << c.threshold;
  e << YAML::Key << "gain" << YAML::Value << c.gain;
  e << YAML::Key << "self_pairs" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& [a, b] : c.self_pairs) e << YAML::Flow << YAML::BeginSeq << a << b << YAML::EndSeq;
  e << YAML::EndSeq << YAML::EndMap;

  e << YAML::Key << "manipulability_gains" << YAML::Value << YAML::Flow << YAML::BeginMap;
  e << YAML::Key << "k_m" << YAML::Value << p.manipulability.k_m;
  e << YAML::Key << "m_0" << YAML::Value << p.manipulability.m_0;
  e << YAML::EndMap;
  e << YAML::Key << "pair_offset" << YAML::Value << p.pair_offset;
  e << YAML::EndMap;
}

ControlletDescriptor cartesian(std::string name, ControlletType type, std::vector<int> robots) {
  ControlletDescriptor d;
  d.name = std::move(name);
  d.type = type;
  d.robots = std::move(robots);
  return d;
}

PlantSide default_reference() {
  PlantSide s;
  s.perturbation.mass = {1, 1, 1, 1.15, 1.15, 1.15, 1.15};
  s.noise = NoiseConfig::defaults();
  s.command_delay = 1;
  s.read_phase = 0.5e-3;
  return s;
}

}  // namespace

BenchCondition parse_condition(std::string_view s) {
  if (s == "NF") return BenchCondition::kNF;
  if (s == "CA") return BenchCondition::kCA;
  if (s == "MA") return BenchCondition::kMA;
  if (s == "CA-MA") return BenchCondition::kCAMA;
  if (s == "C-MA") return BenchCondition::kCMA;
  throw ContractError("unknown benchmark condition '" + std::string(s) + "' (NF|CA|MA|CA-MA|C-MA)");
}

const char* to_string(BenchCondition c) {
  switch (c) {
    case BenchCondition::kNF:
      return "NF";
    case BenchCondition::kCA:
      return "CA";
    case BenchCondition::kMA:
      return "MA";
    case BenchCondition::kCAMA:
      return "CA-MA";
    case BenchCondition::kCMA:
      return "C-MA";
  }
  return "?";
}

std::vector<RobotSetup> facing_pair() {
  RobotSetup a, b;
  a.xyz = Vec3(0, kFacingOffset, 0);
  a.rpy = Vec3(0, 0, -kPi / 2);
  b.xyz = Vec3(0, -kFacingOffset, 0);
  b.rpy = Vec3(0, 0, kPi / 2);
  return {a, b};
}

ScenarioConfig task_defaults(int task_id) {
  ScenarioConfig c;
  c.name = "task" + std::to_string(task_id);
  c.task.id = task_id;
  c.task.validate();
  c.robots = task_id == 5 ? facing_pair() : std::vector<RobotSetup>{RobotSetup{}};
  c.plant.reference = default_reference();
  c.out = "runs/" + c.name;
  ControlletDescriptor d;
  switch (task_id) {
    case 1:
      d = cartesian("joint", ControlletType::kJointImpedance, {0});
      break;
    case 2:
      d = cartesian("cartesian", ControlletType::kCartesian, {0});
      d.params.K_c.head<3>().setConstant(1000.0);
      break;
    case 3:
    case 4:
      d = cartesian("ufic", ControlletType::kUfic, {0});
      d.params.ufic.F_d[2] = -(task_id == 3 ? c.task.force_peak : c.task.contact_force);
      c.plant.surface = true;
      break;
    case 5:
      d = cartesian("grasp", ControlletType::kCoupledUfic, {0, 1});
      d.params.ufic.force_axes = {false, true, false, false, false, false};
      d.params.ufic.F_d[1] = -c.task.squeeze;
      c.plant.surface = true;
      c.plant.box = true;
      c.plant.surface_offset = -c.plant.box_half_extents.z();
      break;
  }
  c.controllets = {d};
  c.active = {d.name};
  return c;
}

ScenarioConfig bench_defaults(BenchCondition cond) {
  ScenarioConfig c;
  c.name = std::string("bench-") + to_string(cond);
  c.benchmark = cond;
  c.task.id = 2;
  c.task.coupled = cond == BenchCondition::kCMA;
  c.robots = facing_pair();
  c.duration = 30.0;
  c.trials = 1;
  c.out = "runs/" + c.name;
  // The benchmark plant is nominal apart from noise and a half-tick read
  // phase, so the command delay has a known true value.
  c.plant.reference.noise = NoiseConfig::defaults();
  c.plant.reference.read_phase = 0.5e-3;
  ControlletDescriptor d = cond == BenchCondition::kCMA
                               ? cartesian("CDC", ControlletType::kCoupledCartesian, {0, 1})
                               : cartesian("DC", ControlletType::kCartesian, {0, 1});
  d.collision_avoidance = cond == BenchCondition::kCA || cond == BenchCondition::kCAMA;
  d.manipulability = cond != BenchCondition::kNF && cond != BenchCondition::kCA;
  c.controllets = {d};
  c.active = {d.name};
  return c;
}

void ScenarioConfig::validate(int dof) const {
  task.validate();
  if (robots.empty()) throw ContractError("scenario: no robots");
  if (task.id == 5 && robots.size() != 2) throw ContractError("scenario: task 5 needs exactly two robots");
  for (std::size_t r = 0; r < robots.size(); ++r) {
    if (robots[r].q0 && robots[r].q0->size() != dof) {
      throw ContractError("scenario: robot " + std::to_string(r) + " q0 has " +
                          std::to_string(robots[r].q0->size()) + " entries, model has " + std::to_string(dof));
    }
  }
  std::set<std::string> names;
  for (const auto& d : controllets) {
    if (!names.insert(d.name).second) throw ContractError("scenario: duplicate controllet '" + d.name + "'");
    d.validate(static_cast<int>(robots.size()));
    if (d.params.q_dN && d.params.q_dN->size() != dof) {
      throw ContractError("controllet " + d.name + ": q_dN size does not match the model");
    }
    if (d.params.joint_stiffness.size() != dof || d.params.joint_damping.size() != dof) {
      throw ContractError("controllet " + d.name + ": joint gains size does not match the model");
    }
  }
  std::set<std::string> seen;
  for (const auto& a : active) {
    if (!names.count(a)) throw ContractError("scenario: active controllet '" + a + "' is not defined");
    if (!seen.insert(a).second) throw ContractError("scenario: controllet '" + a + "' listed twice in active");
  }
  if (!(plant.dt > 0)) throw ContractError("scenario: plant dt must be positive");
  plant.contact.validate();
  for (const PlantSide* s : {&plant.reference, &plant.sim}) {
    s->noise.validate();
    if (s->command_delay < 0) throw ContractError("scenario: negative command delay");
    if (s->read_phase < 0 || s->read_phase >= plant.dt) throw ContractError("scenario: read_phase must be in [0, dt)");
  }
  if (plant.box && ((plant.box_half_extents.array() <= 0).any() || !(plant.box_mass > 0))) {
    throw ContractError("scenario: box needs positive extents and mass");
  }
  if (!(duration > 0)) throw ContractError("scenario: duration must be positive");
  if (trials < 1) throw ContractError("scenario: trials must be at least 1");
  if (!(identification.duration > 0) || identification.stride < 1 || !(identification.lambda >= 0) ||
      !(identification.cutoff_hz > 0) || !(identification.range_fraction > 0 && identification.range_fraction <= 1)) {
    throw ContractError("scenario: bad identification settings");
  }
  if (switching.trials < 1 || switching.min_gap < 3 || switching.max_gap < switching.min_gap) {
    throw ContractError("scenario: switching needs trials >= 1 and 3 <= min_gap <= max_gap");
  }
  if (!(budget_us > 0)) throw ContractError("scenario: budget_us must be positive");
}

ScenarioConfig parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw FormatError(e.msg, e.mark.line + 1);
  }
  yaml::check_keys(root, {"name", "model", "task", "benchmark", "robots", "controllets", "active", "plant",
                          "duration", "trials", "seed", "time_mode", "out", "identification", "switching",
                          "budget_us"});
  const YAML::Node task = root["task"];
  const YAML::Node bench = root["benchmark"];
  ScenarioConfig c;
  if (bench) {
    wrap(bench, [&] { c = bench_defaults(parse_condition(yaml::as<std::string>(bench, "benchmark"))); });
  } else if (task) {
    if (!task.IsMap()) throw FormatError("expected a mapping", yaml::line(task));
    const int id = yaml::get<int>(task, "id");
    wrap(task["id"], [&] { c = task_defaults(id); });
  } else {
    throw FormatError("need either 'task' or 'benchmark'", yaml::line(root));
  }
  if (task) {
    const int id = yaml::get(task, "id", c.task.id);
    if (id != c.task.id) {
      if (!bench) throw FormatError("task id changed", yaml::line(task));
      c.task.id = id;
    }
    read_task(task, c.task);
  }
  c.name = yaml::get(root, "name", c.name);
  c.model = yaml::get(root, "model", c.model);
  if (const auto& rs = root["robots"]) {
    if (!rs.IsSequence()) throw FormatError("expected a sequence of robots", yaml::line(rs));
    c.robots.clear();
    for (const auto& r : rs) c.robots.push_back(read_robot(r));
  }
  if (const auto& cs = root["controllets"]) {
    if (!cs.IsSequence()) throw FormatError("expected a sequence of controllets", yaml::line(cs));
    c.controllets.clear();
    for (const auto& d : cs) c.controllets.push_back(read_controllet(d));
    if (!root["active"]) c.active.clear();
  }
  if (root["active"]) c.active = strings(root["active"]);
  if (root["plant"]) read_plant(root["plant"], c.plant);
  c.duration = yaml::get(root, "duration", c.duration);
  c.trials = yaml::get(root, "trials", c.trials);
  c.seed = yaml::get(root, "seed", c.seed);
  if (const auto& tm = root["time_mode"]) {
    wrap(tm, [&] { c.time_mode = parse_time_mode(yaml::as<std::string>(tm, "time_mode")); });
  }
  c.out = yaml::get(root, "out", c.out);
  if (const auto& id = root["identification"]) {
    yaml::check_keys(id, {"duration", "lift", "range_fraction", "lambda", "cutoff_hz", "stride", "seed"});
    IdentificationSetup& s = c.identification;
    s.duration = yaml::get(id, "duration", s.duration);
    s.lift = yaml::get(id, "lift", s.lift);
    s.range_fraction = yaml::get(id, "range_fraction", s.range_fraction);
    s.lambda = yaml::get(id, "lambda", s.lambda);
    s.cutoff_hz = yaml::get(id, "cutoff_hz", s.cutoff_hz);
    s.stride = yaml::get(id, "stride", s.stride);
    s.seed = yaml::get(id, "seed", s.seed);
  }
  if (const auto& sw = root["switching"]) {
    yaml::check_keys(sw, {"trials", "min_gap", "max_gap"});
    c.switching.trials = yaml::get(sw, "trials", c.switching.trials);
    c.switching.min_gap = yaml::get(sw, "min_gap", c.switching.min_gap);
    c.switching.max_gap = yaml::get(sw, "max_gap", c.switching.max_gap);
  }
  c.budget_us = yaml::get(root, "budget_us", c.budget_us);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string dump_scenario(const ScenarioConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << c.name;
  e << YAML::Key << "model" << YAML::Value << c.model;
  if (c.benchmark) e << YAML::Key << "benchmark" << YAML::Value << to_string(*c.benchmark);
  const TaskSpec& t = c.task;
  e << YAML::Key << "task" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "id" << YAML::Value << t.id;
  e << YAML::Key << "joint_amplitude" << YAML::Value << t.joint_amplitude;
  e << YAML::Key << "joint_frequency" << YAML::Value << t.joint_frequency;
  e << YAML::Key << "circle_radius" << YAML::Value << t.circle_radius;
  e << YAML::Key << "circle_period" << YAML::Value << t.circle_period;
  e << YAML::Key << "force_peak" << YAML::Value << t.force_peak;
  e << YAML::Key << "force_period" << YAML::Value << t.force_period;
  e << YAML::Key << "contact_force" << YAML::Value << t.contact_force;
  e << YAML::Key << "contact_radius" << YAML::Value << t.contact_radius;
  e << YAML::Key << "contact_period" << YAML::Value << t.contact_period;
  e << YAML::Key << "squeeze" << YAML::Value << t.squeeze;
  e << YAML::Key << "lift" << YAML::Value << t.lift;
  e << YAML::Key << "lift_period" << YAML::Value << t.lift_period;
  e << YAML::Key << "coupled" << YAML::Value << t.coupled;
  e << YAML::EndMap;

  e << YAML::Key << "robots" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : c.robots) {
    e << YAML::BeginMap;
    emit_vec(e, "xyz", r.xyz);
    emit_vec(e, "rpy", r.rpy);
    if (r.q0) emit_vec(e, "q0", *r.q0);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "controllets" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.controllets) emit_controllet(e, d);
  e << YAML::EndSeq;
  e << YAML::Key << "active" << YAML::Value;
  emit_seq(e, c.active, static_cast<int>(c.active.size()));

  const PlantSetup& p = c.plant;
  e << YAML::Key << "plant" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dt" << YAML::Value << p.dt;
  e << YAML::Key << "contact" << YAML::Value << YAML::Flow << YAML::BeginMap;
  e << YAML::Key << "stiffness" << YAML::Value << p.contact.stiffness;
  e << YAML::Key << "damping" << YAML::Value << p.contact.damping;
  e << YAML::Key << "friction" << YAML::Value << p.contact.friction;
  e << YAML::EndMap;
  e << YAML::Key << "surface" << YAML::Value << p.surface;
  e << YAML::Key << "surface_offset" << YAML::Value << p.surface_offset;
  e << YAML::Key << "box" << YAML::Value << p.box;
  emit_vec(e, "box_half_extents", p.box_half_extents);
  e << YAML::Key << "box_mass" << YAML::Value << p.box_mass;
  e << YAML::Key << "divergence_limit" << YAML::Value << p.divergence_limit;
  emit_side(e, "reference", p.reference);
  emit_side(e, "sim", p.sim);
  e << YAML::EndMap;

  e << YAML::Key << "duration" << YAML::Value << c.duration;
  e << YAML::Key << "trials" << YAML::Value << c.trials;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "time_mode" << YAML::Value << to_string(c.time_mode);
  e << YAML::Key << "out" << YAML::Value << c.out;

  const IdentificationSetup& s = c.identification;
  e << YAML::Key << "identification" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "duration" << YAML::Value << s.duration;
  e << YAML::Key << "lift" << YAML::Value << s.lift;
  e << YAML::Key << "range_fraction" << YAML::Value << s.range_fraction;
  e << YAML::Key << "lambda" << YAML::Value << s.lambda;
  e << YAML::Key << "cutoff_hz" << YAML::Value << s.cutoff_hz;
  e << YAML::Key << "stride" << YAML::Value << s.stride;
  e << YAML::Key << "seed" << YAML::Value << s.seed;
  e << YAML::EndMap;
  e << YAML::Key << "switching" << YAML::Value << YAML::Flow << YAML::BeginMap;
  e << YAML::Key << "trials" << YAML::Value << c.switching.trials;
  e << YAML::Key << "min_gap" << YAML::Value << c.switching.min_gap;
  e << YAML::Key << "max_gap" << YAML::Value << c.switching.max_gap;
  e << YAML::EndMap;
  e << YAML::Key << "budget_us" << YAML::Value << c.budget_us;
  e << YAML::EndMap;
  if (!e.good()) throw ContractError("scenario dump failed: " + e.GetLastError());
  return std::string(e.c_str()) + "\n";
}

}  // namespace mmctl
