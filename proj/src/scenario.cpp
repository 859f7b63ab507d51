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

#include "mmctl/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mmctl/kinematics.hpp"

namespace mmctl {

namespace {

using Clock = std::chrono::steady_clock;
using Json = nlohmann::ordered_json;

constexpr std::uint64_t kSeedStride = 1000003;

std::uint32_t trace_flags(std::uint32_t bus_flags, std::uint32_t plant_flags) {
  std::uint32_t f = bus_flags;
  if (plant_flags & kPlantFault) f |= kFlagPlantFault;
  if (plant_flags & kPlantContact) f |= kFlagPlantContact;
  return f;
}

long tick_count(const ScenarioConfig& cfg) { return std::lround(cfg.duration / cfg.plant.dt); }

// Writes the controller side of row k: measured state, command, terms,
// estimated wrench and end-effector pose.
void record_controller(Trace& trace, std::size_t i, long k, double t, const SharedRobotBus& bus,
                       std::span<const PlantOutput> sensors) {
  double* row = trace.row(i);
  row[0] = static_cast<double>(k);
  row[1] = t;
  for (int r = 0; r < bus.size(); ++r) {
    const RobotSlot& s = bus.robot(r);
    trace.get(i, r, Channel::kQ) = sensors[r].state.q;
    trace.get(i, r, Channel::kQd) = sensors[r].state.qd;
    trace.get(i, r, Channel::kTauCmd) = s.tau_cmd;
    trace.get(i, r, Channel::kForce) = sensors[r].F_EE;
    const CartesianState x = pose_of(s.frames);
    const Quat qw = Quat(s.base.rotation) * x.orientation;
    auto pose = trace.get(i, r, Channel::kPose);
    pose.head<3>() = s.base.apply(x.position);
    pose[3] = qw.w();
    pose[4] = qw.x();
    pose[5] = qw.y();
    pose[6] = qw.z();
    trace.get(i, r, Channel::kTask) = s.terms.task;
    trace.get(i, r, Channel::kNull) = s.terms.null;
    trace.get(i, r, Channel::kCor) = s.terms.cor;
    trace.get(i, r, Channel::kCa) = s.terms.ca;
    trace.get(i, r, Channel::kMa) = s.terms.ma;
    trace.get(i, r, Channel::kFlags)[0] = static_cast<double>(s.flags);
  }
}

// Writes the plant side of row i: what was applied over the step that
// followed the command.
void record_plant(Trace& trace, std::size_t i, int r, const VecN& tau_meas, const VecN& tau_app, double read_time,
                  std::uint32_t plant_flags) {
  trace.get(i, r, Channel::kTauMeas) = tau_meas;
  trace.get(i, r, Channel::kTauApp) = tau_app;
  trace.get(i, r, Channel::kReadTime)[0] = read_time;
  auto flags = trace.get(i, r, Channel::kFlags);
  flags[0] = static_cast<double>(trace_flags(static_cast<std::uint32_t>(flags[0]), plant_flags));
}

struct Rig {
  std::vector<RobotStart> starts;
  std::unique_ptr<World> world;
  std::unique_ptr<Manager> manager;
  std::unique_ptr<TaskSource> source;
  std::vector<TargetSlot> targets;
  std::vector<PlantOutput> sensors;
  std::vector<VecN> cmd;
  long ticks = 0;
};

Rig make_rig(const ScenarioConfig& cfg, const RobotModel& model, const RunOptions& opt) {
  cfg.validate(model.dof());
  Rig g;
  g.starts = scenario_starts(cfg, model);
  g.world = std::make_unique<World>(world_config(cfg, model, opt.role, opt.sim_physics, opt.seed));
  const int n = static_cast<int>(cfg.robots.size());
  std::vector<const RobotModel*> models(n, &model);
  std::vector<Transform> bases;
  for (const auto& r : cfg.robots) bases.push_back(Transform::from_xyz_rpy(r.xyz, r.rpy));
  g.ticks = tick_count(cfg);
  ManagerConfig mc;
  mc.dt = cfg.plant.dt;
  mc.time_mode = opt.mode;
  mc.record_capacity = std::max<std::size_t>(4096, static_cast<std::size_t>(g.ticks));
  mc.record_timing = opt.record_timing;
  g.manager = std::make_unique<Manager>(cfg.controllets, cfg.active, SharedRobotBus(models, bases), mc);
  g.source = std::make_unique<TaskSource>(cfg.task, g.starts);
  g.targets.resize(n);
  g.sensors.resize(n);
  g.cmd.resize(n);
  for (int r = 0; r < n; ++r) {
    g.sensors[r] = g.world->output(r);
    g.targets[r].q = g.starts[r].q;
    g.targets[r].qd = VecN::Zero(model.dof());
    g.cmd[r] = VecN::Zero(model.dof());
  }
  return g;
}

void sample_targets(const RunOptions& opt, const Rig& g, double t, std::span<TargetSlot> out) {
  if (opt.targets) {
    opt.targets(t, out);
  } else {
    g.source->sample(t, out);
  }
}

void run_virtual(Rig& g, const RunOptions& opt, RunResult& res) {
  World& w = *g.world;
  Manager& m = *g.manager;
  const int n = w.robot_count();
  const double dt = w.dt();
  for (long k = 0; k < g.ticks; ++k) {
    for (int r = 0; r < n; ++r) g.sensors[r] = w.output(r);
    sample_targets(opt, g, k * dt, g.targets);
    if (opt.before_tick) opt.before_tick(k, m);
    m.tick(k, g.sensors, g.targets);
    for (int r = 0; r < n; ++r) g.cmd[r] = m.command(r);
    w.step(g.cmd);
    const std::size_t i = res.trace.rows();
    res.trace.append_row();
    record_controller(res.trace, i, k, k * dt, m.bus(), g.sensors);
    for (int r = 0; r < n; ++r) {
      const PlantOutput& o = w.output(r);
      record_plant(res.trace, i, r, o.tau_meas, o.tau_true, o.read_time, o.flags);
    }
    ++res.ticks;
    if (opt.after_tick) opt.after_tick(k, m);
    if (w.faulted()) {
      res.faulted = true;
      break;
    }
    if (m.stop_requested()) {
      res.stopped = true;
      break;
    }
  }
}

// The plant steps on its own thread, paced by the clock. Each period it
// samples the newest command at the read point (read_phase after the tick,
// or the end of the period when read_phase is zero), integrates, and
// publishes the next sensor frame at the next tick boundary. The tick loop
// computes whenever a new frame arrives.
void run_wall_clock(Rig& g, const RunOptions& opt, double read_phase, RunResult& res) {
  World& w = *g.world;
  Manager& m = *g.manager;
  const int n = w.robot_count();
  const double dt = w.dt();
  const double read_point = read_phase > 0 ? read_phase : dt;

  struct SensorFrame {
    long tick = 0;
    std::vector<PlantOutput> out;
  };
  struct CommandFrame {
    long tick = -1;
    std::vector<VecN> cmd;
  };
  SensorFrame s0{0, g.sensors};
  CommandFrame c0;
  for (int r = 0; r < n; ++r) {
    const RobotSlot& slot = m.bus().robot(r);
    c0.cmd.push_back(gravity_torque(*slot.model, g.sensors[r].state.q));
  }
  TripleBuffer<SensorFrame> sensor_buf(s0);
  TripleBuffer<CommandFrame> command_buf(c0);
  // Written by the plant thread only, read after it joins.
  const auto steps = static_cast<std::size_t>(g.ticks);
  std::vector<double> read_times(steps, 0.0);
  std::vector<std::vector<VecN>> meas(n, std::vector<VecN>(steps)), app(n, std::vector<VecN>(steps));
  std::vector<std::vector<std::uint32_t>> pflags(n, std::vector<std::uint32_t>(steps, 0));
  std::vector<std::size_t> row_of(static_cast<std::size_t>(g.ticks), static_cast<std::size_t>(-1));
  std::atomic<bool> done{false}, abort{false};
  std::atomic<long> missed{0};
  const auto t0 = Clock::now();
  auto since = [t0](Clock::time_point t) { return std::chrono::duration<double>(t - t0).count(); };
  auto at = [t0](double s) {
    return t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s));
  };
  // Publish frame 0 so the loop can compute before the first read point.
  sensor_buf.back() = s0;
  sensor_buf.publish();

  std::thread plant([&] {
    std::vector<VecN> cmd = c0.cmd;
    for (long s = 0; s < g.ticks && !abort.load(std::memory_order_acquire); ++s) {
      std::this_thread::sleep_until(at(s * dt + read_point));
      command_buf.update();
      const CommandFrame& c = command_buf.front();
      if (c.tick != s) missed.fetch_add(1, std::memory_order_relaxed);
      for (int r = 0; r < n; ++r) cmd[r] = c.cmd[r];
      const double read_time = since(Clock::now());
      w.step(cmd);
      const auto si = static_cast<std::size_t>(s);
      read_times[si] = read_time;
      for (int r = 0; r < n; ++r) {
        meas[r][si] = w.output(r).tau_meas;
        app[r][si] = w.output(r).tau_true;
        pflags[r][si] = w.output(r).flags;
      }
      std::this_thread::sleep_until(at((s + 1) * dt));
      SensorFrame& f = sensor_buf.back();
      f.tick = s + 1;
      for (int r = 0; r < n; ++r) f.out[r] = w.output(r);
      sensor_buf.publish();
      if (w.faulted()) break;
    }
    done.store(true, std::memory_order_release);
  });

  long last = -1;
  while (true) {
    if (!sensor_buf.update() || sensor_buf.front().tick == last) {
      if (done.load(std::memory_order_acquire)) break;
      std::this_thread::yield();
      continue;
    }
    const SensorFrame& f = sensor_buf.front();
    const long k = f.tick;
    last = k;
    if (k >= g.ticks) break;
    sample_targets(opt, g, k * dt, g.targets);
    if (opt.before_tick) opt.before_tick(k, m);
    m.tick(k, f.out, g.targets);
    CommandFrame& c = command_buf.back();
    c.tick = k;
    for (int r = 0; r < n; ++r) c.cmd[r] = m.command(r);
    command_buf.publish();
    const double write_time = since(Clock::now());
    const std::size_t i = res.trace.rows();
    res.trace.append_row();
    record_controller(res.trace, i, k, write_time, m.bus(), f.out);
    row_of[static_cast<std::size_t>(k)] = i;
    ++res.ticks;
    if (opt.after_tick) opt.after_tick(k, m);
    if (m.stop_requested()) {
      res.stopped = true;
      abort.store(true, std::memory_order_release);
    }
  }
  abort.store(true, std::memory_order_release);
  plant.join();
  for (long k = 0; k < g.ticks; ++k) {
    const std::size_t i = row_of[static_cast<std::size_t>(k)];
    if (i == static_cast<std::size_t>(-1)) continue;
    for (int r = 0; r < n; ++r) {
      const auto ks = static_cast<std::size_t>(k);
      if (meas[r][ks].size() == 0) continue;  // the plant stopped before this step
      record_plant(res.trace, i, r, meas[r][ks], app[r][ks], read_times[ks], pflags[r][ks]);
    }
  }
  res.missed = missed.load();
  res.faulted = w.faulted();
}

Json report_json(const FidelityReport& r) {
  Json j;
  j["robot"] = r.robot;
  j["q_rad"] = r.q;
  j["qd_rad_s"] = r.qd;
  j["tau_Nm"] = r.tau;
  j["x_m"] = r.x;
  j["F_N"] = r.F;
  j["c_err_Nm"] = r.c_err;
  j["samples"] = r.samples;
  j["delay_ms"] = std::isfinite(r.delay_ms) ? Json(r.delay_ms) : Json(nullptr);
  j["valid"] = r.valid;
  return j;
}

Json checks_json(const std::vector<Check>& checks) {
  Json a = Json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return a;
}

Json timing_json(const TimingSummary& t) {
  return {{"label", t.label}, {"count", t.count}, {"mean_us", t.mean}, {"std_us", t.std},
          {"p50_us", t.p50},  {"p99_us", t.p99},  {"max_us", t.max}};
}

Json switch_record_json(const SwitchRecord& r) {
  return {{"seq", r.seq},
          {"outcome", to_string(r.outcome)},
          {"request_tick", r.request_tick},
          {"first_compute_tick", r.first_compute_tick},
          {"latency_ticks", r.latency_ticks},
          {"latency_ms", r.latency_ms}};
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// Arm name for multi-robot runs, empty for a single robot.
std::string side_label(const ScenarioConfig& cfg, int robot) {
  if (cfg.robots.size() < 2) return "";
  return robot == 0 ? " left" : robot == 1 ? " right" : " robot " + std::to_string(robot);
}

bool sides_identical(const ScenarioConfig& cfg) {
  const PlantSide& a = cfg.plant.reference;
  const PlantSide& b = cfg.plant.sim;
  return a.perturbation.identity() && b.perturbation.identity() && a.noise.zero() && b.noise.zero() &&
         a.command_delay == b.command_delay && a.read_phase == b.read_phase;
}

bool finite_report(const FidelityReport& r) {
  for (double v : {r.q, r.qd, r.tau, r.x, r.F, r.c_err}) {
    if (!std::isfinite(v) || v < 0) return false;
  }
  return true;
}

double max_channel(const FidelityReport& r) { return std::max({r.q, r.qd, r.tau, r.x, r.F, r.c_err}); }

}  // namespace

bool all_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string check_lines(const std::vector<Check>& checks) {
  std::string out;
  for (const auto& c : checks) {
    out += std::string(c.pass ? "PASS " : "FAIL ") + c.name + (c.detail.empty() ? "" : ": " + c.detail) + "\n";
  }
  return out;
}

RobotModel scenario_model(const ScenarioConfig& cfg) {
  return cfg.model.empty() ? default_model() : load_model(cfg.model);
}

std::vector<RobotStart> scenario_starts(const ScenarioConfig& cfg, const RobotModel& model) {
  std::vector<RobotStart> out;
  for (const auto& r : cfg.robots) {
    const Transform base = Transform::from_xyz_rpy(r.xyz, r.rpy);
    RobotStart s;
    s.q = r.q0 ? *r.q0 : model.home;
    const CartesianState x = forward_kinematics(model, s.q);
    s.ee.position = base.apply(x.position);
    s.ee.orientation = Quat(base.rotation) * x.orientation;
    out.push_back(s);
  }
  return out;
}

WorldConfig world_config(const ScenarioConfig& cfg, const RobotModel& model, PlantRole role,
                         const RobotModel* sim_physics, std::uint64_t seed) {
  const PlantSide& side = role == PlantRole::kReference ? cfg.plant.reference : cfg.plant.sim;
  const RobotModel& base_physics = role == PlantRole::kSim && sim_physics ? *sim_physics : model;
  const RobotModel physics = side.perturbation.identity() ? base_physics : perturb(base_physics, side.perturbation);
  const auto starts = scenario_starts(cfg, model);
  WorldConfig wc;
  wc.dt = cfg.plant.dt;
  wc.seed = seed;
  wc.divergence_limit = cfg.plant.divergence_limit;
  for (std::size_t r = 0; r < cfg.robots.size(); ++r) {
    RobotPlantConfig rc;
    rc.physics = physics;
    rc.estimator = model;
    rc.base = Transform::from_xyz_rpy(cfg.robots[r].xyz, cfg.robots[r].rpy);
    rc.q0 = starts[r].q;
    rc.qd0 = VecN::Zero(model.dof());
    rc.noise = side.noise;
    rc.command_delay = side.command_delay;
    rc.read_phase = side.read_phase;
    wc.robots.push_back(rc);
  }
  if (cfg.plant.surface) {
    PlaneContact p;
    p.point = starts[0].ee.position + Vec3(0, 0, cfg.plant.surface_offset);
    p.normal = Vec3::UnitZ();
    p.params = cfg.plant.contact;
    wc.planes.push_back(p);
  }
  if (cfg.plant.box) {
    BoxConfig b;
    Vec3 c = Vec3::Zero();
    for (const auto& s : starts) c += s.ee.position;
    b.center = c / static_cast<double>(starts.size());
    b.half_extents = cfg.plant.box_half_extents;
    b.mass = cfg.plant.box_mass;
    b.params = cfg.plant.contact;
    wc.box = b;
  }
  return wc;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return seed * kSeedStride + static_cast<std::uint64_t>(trial);
}

RunResult run_scenario(const ScenarioConfig& cfg, const RobotModel& model, const RunOptions& opt) {
  Rig g = make_rig(cfg, model, opt);
  RunResult res;
  res.trace = Trace(g.world->robot_count(), model.dof());
  res.trace.reserve(static_cast<std::size_t>(g.ticks));
  if (opt.mode == TimeMode::kVirtual) {
    run_virtual(g, opt, res);
  } else {
    const PlantSide& side = opt.role == PlantRole::kReference ? cfg.plant.reference : cfg.plant.sim;
    run_wall_clock(g, opt, side.read_phase, res);
  }
  res.health = g.manager->health();
  res.switches = g.manager->switch_log();
  res.timing_us = g.manager->compute_times_us();
  res.final_active = g.manager->active_names();
  return res;
}

void fill_reports(TaskRun& run) {
  run.trials.clear();
  run.mean.clear();
  run.valid = true;
  for (std::size_t t = 0; t < run.sim.size(); ++t) {
    std::vector<FidelityReport> per_robot;
    for (int r = 0; r < run.ref[t].robots(); ++r) {
      per_robot.push_back(fidelity(run.sim[t], run.ref[t], r));
      run.valid = run.valid && per_robot.back().valid;
    }
    run.trials.push_back(per_robot);
  }
  if (run.trials.empty()) return;
  for (std::size_t r = 0; r < run.trials[0].size(); ++r) {
    std::vector<FidelityReport> col;
    for (const auto& t : run.trials) col.push_back(t[r]);
    run.mean.push_back(mean_report(col));
  }
}

TaskRun run_task(const ScenarioConfig& cfg, const RobotModel& model, const RobotModel* sim_physics) {
  TaskRun run;
  const long ticks = tick_count(cfg);
  bool rows_ok = true, health_ok = true, faults = false;
  long missed = 0;
  for (int t = 0; t < cfg.trials; ++t) {
    RunOptions o;
    o.seed = trial_seed(cfg.seed, t);
    o.mode = cfg.time_mode;
    o.role = PlantRole::kSim;
    o.sim_physics = sim_physics;
    RunResult sim = run_scenario(cfg, model, o);
    o.role = PlantRole::kReference;
    RunResult ref = run_scenario(cfg, model, o);
    for (const RunResult* r : {&sim, &ref}) {
      faults = faults || r->faulted;
      missed += r->missed;
      if (cfg.time_mode == TimeMode::kVirtual) {
        rows_ok = rows_ok && r->ticks == ticks && static_cast<long>(r->trace.rows()) == ticks;
        health_ok = health_ok && r->health.ownership_violations == 0 && r->health.stamp_gaps == 0;
      } else {
        health_ok = health_ok && r->health.ownership_violations == 0;
      }
      run.health.push_back(r->health);
    }
    run.sim.push_back(std::move(sim.trace));
    run.ref.push_back(std::move(ref.trace));
  }
  fill_reports(run);

  run.checks.push_back({"plant stable", !faults, faults ? "a plant diverged; report invalid" : ""});
  run.checks.push_back({"report valid", run.valid, ""});
  run.checks.push_back({"exclusive ownership and stamped ticks", health_ok, ""});
  if (cfg.time_mode == TimeMode::kVirtual) {
    run.checks.push_back({"one row per tick", rows_ok, std::to_string(ticks) + " ticks per run"});
  } else {
    run.checks.push_back({"wall-clock ticks served", true, std::to_string(missed) + " plant steps without a fresh command"});
  }
  bool finite = true;
  for (const auto& t : run.trials) {
    for (const auto& r : t) finite = finite && finite_report(r);
  }
  run.checks.push_back({"RMSE channels finite and non-negative", finite, ""});
  if (sides_identical(cfg) && sim_physics == nullptr && cfg.time_mode == TimeMode::kVirtual) {
    double worst = 0.0;
    for (const auto& t : run.trials) {
      for (const auto& r : t) worst = std::max(worst, max_channel(r));
    }
    run.checks.push_back({"identical plants give zero gap", worst < 1e-9, "max RMSE " + fmt(worst)});
  }
  return run;
}

SwitchTestResult run_switch_test(const ScenarioConfig& cfg, const RobotModel& model) {
  ScenarioConfig sc = cfg;
  if (sc.robots.size() != 2) sc.robots = facing_pair();
  sc.benchmark.reset();
  sc.task = TaskSpec{};
  sc.task.id = 2;
  ControlletDescriptor dc;
  dc.name = "DC";
  dc.type = ControlletType::kCartesian;
  dc.robots = {0, 1};
  ControlletDescriptor dcx = dc;
  dcx.name = "DC-CA-MA";
  dcx.collision_avoidance = true;
  dcx.manipulability = true;
  ControlletDescriptor left;
  left.name = "L";
  left.type = ControlletType::kJointImpedance;
  left.robots = {0};
  ControlletDescriptor right = left;
  right.name = "R";
  right.robots = {1};
  sc.controllets = {dc, dcx, left, right};
  sc.active = {"DC"};
  const std::vector<std::vector<std::string>> sets = {{"DC"}, {"DC-CA-MA"}, {"L", "R"}, {"L"}, {"R"}};
  const int trials = cfg.switching.trials;
  const long lead = 50;
  sc.duration = (lead + static_cast<double>(trials + 1) * cfg.switching.max_gap) * sc.plant.dt;

  SwitchTestResult res;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> gap(cfg.switching.min_gap, cfg.switching.max_gap);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long next = lead;
  int submitted = 0;
  std::size_t current = 0;
  RunOptions o;
  o.role = PlantRole::kReference;
  o.seed = trial_seed(cfg.seed, 0);
  o.mode = TimeMode::kVirtual;
  o.before_tick = [&](long k, Manager& m) {
    if (k != next || submitted >= trials) return;
    std::size_t pick = current;
    // One request in ten repeats the active set.
    if (unit(rng) >= 0.1) {
      pick = std::uniform_int_distribution<std::size_t>(0, sets.size() - 2)(rng);
      if (pick >= current) ++pick;
    }
    m.request_switch(sets[pick]);
    std::string label;
    for (const auto& s : sets[pick]) label += (label.empty() ? "" : "+") + s;
    res.requested.push_back(label);
    current = pick;
    ++submitted;
    next = k + gap(rng);
  };
  o.after_tick = [&](long, Manager& m) {
    while (auto r = m.poll_reply()) res.records.push_back(*r);
  };
  RunResult run = run_scenario(sc, model, o);
  res.health = run.health;
  res.ticks = run.ticks;

  std::vector<double> ms;
  bool latency_ok = true, accepted = true, consistent = true;
  res.min_ticks = std::numeric_limits<int>::max();
  res.max_ticks = 0;
  for (const auto& r : res.records) {
    accepted = accepted && r.accepted();
    latency_ok = latency_ok && r.latency_ticks >= 1 && r.latency_ticks <= 2;
    consistent = consistent && r.first_compute_tick - r.request_tick == r.latency_ticks;
    res.min_ticks = std::min(res.min_ticks, r.latency_ticks);
    res.max_ticks = std::max(res.max_ticks, r.latency_ticks);
    ms.push_back(r.latency_ms);
  }
  if (res.records.empty()) res.min_ticks = 0;
  if (!ms.empty()) {
    res.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
    double v = 0;
    for (double x : ms) v += (x - res.mean_ms) * (x - res.mean_ms);
    res.std_ms = std::sqrt(v / ms.size());
  }
  res.checks.push_back({"switch records", static_cast<int>(res.records.size()) == trials,
                        std::to_string(res.records.size()) + " of " + std::to_string(trials)});
  res.checks.push_back({"all switches accepted", accepted, ""});
  res.checks.push_back({"latency within 1..2 ticks", latency_ok && !res.records.empty(),
                        "min " + std::to_string(res.min_ticks) + ", max " + std::to_string(res.max_ticks)});
  res.checks.push_back({"latency matches first compute tick", consistent, ""});
  res.checks.push_back({"no unstamped tick", run.health.stamp_gaps == 0 && !run.faulted,
                        std::to_string(run.health.stamp_gaps) + " gaps"});
  res.checks.push_back({"exclusive ownership", run.health.ownership_violations == 0, ""});
  return res;
}

BenchRun run_benchmark(const ScenarioConfig& cfg, const RobotModel& model) {
  BenchRun b;
  b.condition = cfg.benchmark.value_or(BenchCondition::kNF);
  RunOptions o;
  o.role = PlantRole::kReference;
  o.seed = trial_seed(cfg.seed, 0);
  o.mode = cfg.time_mode;
  o.record_timing = true;
  RunResult r = run_scenario(cfg, model, o);
  b.timing = timing_summary(to_string(b.condition), r.timing_us);
  b.samples = static_cast<long>(r.timing_us.size());
  b.timing_us = r.timing_us;
  b.health = r.health;
  const long ticks = tick_count(cfg);
  const double dt_us = cfg.plant.dt * 1e6;
  const long slow = std::count_if(r.timing_us.begin(), r.timing_us.end(), [&](double v) { return v > dt_us; });
  b.overrun_rate = static_cast<double>(slow + r.missed) / static_cast<double>(std::max(1L, ticks));
  const PlantSide& side = cfg.plant.reference;
  b.expected_delay_ms = (side.command_delay * cfg.plant.dt + side.read_phase) * 1e3;
  bool delay_ok = true;
  std::string delay_detail;
  for (int k = 0; k < r.trace.robots(); ++k) {
    try {
      b.delay.push_back(command_delay(r.trace, k));
    } catch (const ContractError& e) {
      b.delay.push_back({std::nan(""), 0.0, 0.0});
    }
    const double err = std::abs(b.delay.back().ms - b.expected_delay_ms);
    delay_detail += (delay_detail.empty() ? "" : ", ") + fmt(b.delay.back().ms, 4) + " ms";
    if (cfg.time_mode == TimeMode::kVirtual) delay_ok = delay_ok && err <= 0.5;
  }
  b.trace = std::move(r.trace);

  b.checks.push_back({"plant stable", !r.faulted, ""});
  if (cfg.time_mode == TimeMode::kVirtual) {
    b.checks.push_back({"one timing sample per tick", b.samples == ticks,
                        std::to_string(b.samples) + " of " + std::to_string(ticks)});
    b.checks.push_back({"stamped ticks and exclusive ownership",
                        r.health.stamp_gaps == 0 && r.health.ownership_violations == 0, ""});
    b.checks.push_back({"delay estimate within 0.5 ms of the injected delay", delay_ok,
                        delay_detail + " vs " + fmt(b.expected_delay_ms, 4) + " ms"});
  } else {
    b.checks.push_back({"exclusive ownership", r.health.ownership_violations == 0, ""});
    b.checks.push_back({"tick overrun rate at most 1%", b.overrun_rate <= 0.01,
                        fmt(100.0 * b.overrun_rate, 3) + "%"});
  }
  return b;
}

VecN lifted_posture(const RobotModel& model, const VecN& q0, double dz) {
  const Vec3 target = forward_kinematics(model, q0).position + Vec3(0, 0, dz);
  const VecN lo = model.lower_limits(), hi = model.upper_limits();
  VecN q = q0;
  for (int it = 0; it < 500; ++it) {
    const Vec3 err = target - forward_kinematics(model, q).position;
    if (err.norm() < 1e-9) break;
    const Jac J = jacobian(model, q);
    const Jac3 Jp = J.topRows<3>();
    const Mat3 A = Jp * Jp.transpose() + 1e-4 * Mat3::Identity();
    q += Jp.transpose() * A.ldlt().solve(err);
    q = q.cwiseMax(lo).cwiseMin(hi);
  }
  if ((target - forward_kinematics(model, q).position).norm() > 1e-6) {
    throw ContractError("lifted_posture: target out of reach");
  }
  return q;
}

IdentificationRun run_identification(const ScenarioConfig& cfg, const RobotModel& model) {
  IdentificationRun out;
  const IdentificationSetup& is = cfg.identification;
  out.before = run_task(cfg, model);

  // Excitation on the reference plant, robot 0 alone, above its start pose.
  const auto starts = scenario_starts(cfg, model);
  const VecN center = lifted_posture(model, starts[0].q, is.lift);
  ScenarioConfig ex = cfg;
  ex.task = TaskSpec{};
  ex.task.id = 1;
  ex.benchmark.reset();
  ex.robots = {cfg.robots[0]};
  ex.robots[0].q0 = center;
  ex.plant.box = false;
  // The surface sits relative to the first start pose, which is now lifted.
  ex.plant.surface_offset = cfg.plant.surface_offset - is.lift;
  ex.duration = is.duration;
  ControlletDescriptor d;
  d.name = "excite";
  d.type = ControlletType::kJointImpedance;
  d.robots = {0};
  ex.controllets = {d};
  ex.active = {"excite"};

  ExcitationOptions eo;
  eo.duration = is.duration;
  eo.range_fraction = is.range_fraction;
  eo.seed = is.seed;
  const Transform base = Transform::from_xyz_rpy(cfg.robots[0].xyz, cfg.robots[0].rpy);
  if (cfg.plant.surface) eo.plane_z = starts[0].ee.position.z() + cfg.plant.surface_offset;
  out.excitation = make_excitation(model, base, center, eo);

  RunOptions o;
  o.role = PlantRole::kReference;
  o.seed = trial_seed(is.seed, 0);
  o.mode = TimeMode::kVirtual;
  const Excitation& e = out.excitation;
  o.targets = [&e](double t, std::span<TargetSlot> slots) {
    slots[0].q = e.q(t);
    slots[0].qd = e.qd(t);
  };
  RunResult run = run_scenario(ex, model, o);
  out.excitation_trace = std::move(run.trace);

  SampleOptions so;
  so.cutoff_hz = is.cutoff_hz;
  so.stride = is.stride;
  const auto samples = samples_from_trace(out.excitation_trace, 0, cfg.plant.dt, so);
  out.samples = samples.size();
  IdentifyOptions io;
  io.lambda = is.lambda;
  out.fit = identify(model, samples, extract_parameters(model), io);
  out.identified = apply_identified(model, out.fit.pi);
  out.after = run_task(cfg, model, &out.identified);

  // Held-out torque prediction against the reference's true dynamics along
  // the excitation.
  const PlantSide& side = cfg.plant.reference;
  const RobotModel truth = side.perturbation.identity() ? model : perturb(model, side.perturbation);
  std::mt19937_64 rng(is.seed + 1);
  std::uniform_real_distribution<double> when(0.0, is.duration);
  double before = 0, after = 0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    const double t = when(rng);
    const VecN q = e.q(t), qd = e.qd(t);
    const VecN qdd = (e.qd(t + 1e-5) - e.qd(t - 1e-5)) / 2e-5;
    const VecN tau = inverse_dynamics(truth, q, qd, qdd);
    before += (inverse_dynamics(model, q, qd, qdd) - tau).squaredNorm();
    after += (inverse_dynamics(out.identified, q, qd, qdd) - tau).squaredNorm();
  }
  out.heldout_before = std::sqrt(before / (n * model.dof()));
  out.heldout_after = std::sqrt(after / (n * model.dof()));

  out.checks.push_back({"excitation run stable", !run.faulted, ""});
  out.checks.push_back({"identified parameters physical", parameters_physical(out.fit.pi),
                        out.fit.projected ? "projected" : "unconstrained solution"});
  out.checks.push_back({"held-out torque error not worse", out.heldout_after <= out.heldout_before,
                        fmt(out.heldout_before, 4) + " -> " + fmt(out.heldout_after, 4) + " N·m"});
  bool dyn_ok = true;
  std::string detail;
  for (std::size_t r = 0; r < out.before.mean.size(); ++r) {
    const FidelityReport& a = out.before.mean[r];
    const FidelityReport& b = out.after.mean[r];
    const bool ok = b.tau <= 1.05 * a.tau && b.F <= 1.05 * a.F && b.c_err <= 1.05 * a.c_err;
    dyn_ok = dyn_ok && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("robot ") + std::to_string(r) + " tau " + fmt(a.tau, 4) +
              "->" + fmt(b.tau, 4) + ", F " + fmt(a.F, 4) + "->" + fmt(b.F, 4) + ", C_err " + fmt(a.c_err, 4) +
              "->" + fmt(b.c_err, 4);
  }
  out.checks.push_back({"dynamic channels reduced or within 5%", dyn_ok, detail});
  for (const auto& c : out.before.checks) out.checks.push_back({"before: " + c.name, c.pass, c.detail});
  for (const auto& c : out.after.checks) out.checks.push_back({"after: " + c.name, c.pass, c.detail});
  return out;
}

std::string task_json(const ScenarioConfig& cfg, const TaskRun& run) {
  Json j;
  j["kind"] = "task";
  j["name"] = cfg.name;
  j["task"] = cfg.task.id;
  j["time_mode"] = to_string(cfg.time_mode);
  j["seed"] = cfg.seed;
  Json trials = Json::array();
  for (const auto& t : run.trials) {
    Json a = Json::array();
    for (const auto& r : t) a.push_back(report_json(r));
    trials.push_back(a);
  }
  j["trials"] = trials;
  Json mean = Json::array();
  for (const auto& r : run.mean) mean.push_back(report_json(r));
  j["mean"] = mean;
  j["valid"] = run.valid;
  j["checks"] = checks_json(run.checks);
  j["passed"] = all_passed(run.checks);
  return j.dump(2) + "\n";
}

std::string task_text(const ScenarioConfig& cfg, const TaskRun& run) {
  std::vector<FidelityReport> rows;
  std::vector<std::string> labels;
  for (std::size_t t = 0; t < run.trials.size(); ++t) {
    for (const auto& r : run.trials[t]) {
      rows.push_back(r);
      labels.push_back("trial " + std::to_string(t) + side_label(cfg, r.robot));
    }
  }
  for (const auto& r : run.mean) {
    rows.push_back(r);
    labels.push_back("mean" + side_label(cfg, r.robot));
  }
  std::string s = cfg.name + ": task " + std::to_string(cfg.task.id) + ", " + std::to_string(cfg.trials) +
                  " trial(s) of " + fmt(cfg.duration) + " s, " + to_string(cfg.time_mode) + " time\n";
  return s + fidelity_table(rows, labels) + check_lines(run.checks);
}

std::string switch_json(const SwitchTestResult& sw) {
  Json j;
  j["kind"] = "switch";
  j["trials"] = sw.records.size();
  j["mean_ms"] = sw.mean_ms;
  j["std_ms"] = sw.std_ms;
  j["min_ticks"] = sw.min_ticks;
  j["max_ticks"] = sw.max_ticks;
  Json recs = Json::array();
  for (std::size_t i = 0; i < sw.records.size(); ++i) {
    Json r = switch_record_json(sw.records[i]);
    if (i < sw.requested.size()) r["set"] = sw.requested[i];
    recs.push_back(r);
  }
  j["records"] = recs;
  j["checks"] = checks_json(sw.checks);
  j["passed"] = all_passed(sw.checks);
  return j.dump(2) + "\n";
}

std::string switch_text(const SwitchTestResult& sw) {
  std::ostringstream os;
  os << "switch test: " << sw.records.size() << " switches, latency mean " << fmt(sw.mean_ms, 4) << " ms, std "
     << fmt(sw.std_ms, 4) << " ms, range " << sw.min_ticks << ".." << sw.max_ticks << " ticks\n";
  return os.str() + check_lines(sw.checks);
}

std::string bench_json(const ScenarioConfig& cfg, const BenchRun& b, const SwitchTestResult& sw) {
  Json j;
  j["kind"] = "bench";
  j["name"] = cfg.name;
  j["condition"] = to_string(b.condition);
  j["time_mode"] = to_string(cfg.time_mode);
  j["timing"] = timing_json(b.timing);
  j["budget_us"] = cfg.budget_us;
  j["within_budget"] = b.timing.mean <= cfg.budget_us;
  j["overrun_rate"] = b.overrun_rate;
  Json d = Json::array();
  for (const auto& e : b.delay) {
    d.push_back({{"ms", std::isfinite(e.ms) ? Json(e.ms) : Json(nullptr)}, {"peak", e.peak}, {"step_ms", e.step_ms}});
  }
  j["delay"] = d;
  j["expected_delay_ms"] = b.expected_delay_ms;
  j["switch"] = Json::parse(switch_json(sw));
  j["checks"] = checks_json(b.checks);
  j["passed"] = all_passed(b.checks) && all_passed(sw.checks);
  return j.dump(2) + "\n";
}

std::string bench_text(const ScenarioConfig& cfg, const BenchRun& b, const SwitchTestResult& sw) {
  std::ostringstream os;
  os << cfg.name << ": condition " << to_string(b.condition) << ", " << fmt(cfg.duration) << " s, "
     << to_string(cfg.time_mode) << " time\n";
  os << timing_table({b.timing});
  os << "budget " << fmt(cfg.budget_us) << " us: " << (b.timing.mean <= cfg.budget_us ? "within" : "over")
     << "; overrun rate " << fmt(100 * b.overrun_rate, 3) << "%\n";
  for (std::size_t r = 0; r < b.delay.size(); ++r) {
    os << "command delay robot " << r << ": " << fmt(b.delay[r].ms, 4)
       << " ms (injected " << fmt(b.expected_delay_ms, 4) << " ms)\n";
  }
  os << check_lines(b.checks) << switch_text(sw);
  return os.str();
}

std::string identification_json(const ScenarioConfig& cfg, const IdentificationRun& run) {
  Json j;
  j["kind"] = "identify";
  j["name"] = cfg.name;
  j["task"] = cfg.task.id;
  j["samples"] = run.samples;
  j["rank"] = run.fit.rank;
  j["parameters"] = run.fit.pi.size();
  j["condition"] = run.fit.condition;
  j["warning"] = run.fit.warning;
  j["projected"] = run.fit.projected;
  j["fit_rmse_Nm"] = run.fit.fit_rmse;
  j["heldout_before_Nm"] = run.heldout_before;
  j["heldout_after_Nm"] = run.heldout_after;
  j["before"] = Json::parse(task_json(cfg, run.before));
  j["after"] = Json::parse(task_json(cfg, run.after));
  Json red = Json::array();
  for (std::size_t r = 0; r < run.before.mean.size(); ++r) {
    const auto& a = run.before.mean[r];
    const auto& b = run.after.mean[r];
    auto rel = [](double x, double y) { return x > 0 ? 1.0 - y / x : 0.0; };
    red.push_back({{"robot", r}, {"tau", rel(a.tau, b.tau)}, {"F", rel(a.F, b.F)}, {"c_err", rel(a.c_err, b.c_err)}});
  }
  j["reduction"] = red;
  j["checks"] = checks_json(run.checks);
  j["passed"] = all_passed(run.checks);
  return j.dump(2) + "\n";
}

std::string identification_text(const ScenarioConfig& cfg, const IdentificationRun& run) {
  std::ostringstream os;
  os << cfg.name << ": identification from " << run.samples << " samples, rank " << run.fit.rank << " of "
     << run.fit.pi.size() << ", condition " << fmt(run.fit.condition, 3) << (run.fit.warning ? " (warning)" : "")
     << ", fit RMSE " << fmt(run.fit.fit_rmse, 4) << " N·m\n";
  os << "held-out torque error " << fmt(run.heldout_before, 4) << " -> " << fmt(run.heldout_after, 4) << " N·m\n";
  std::vector<FidelityReport> rows;
  std::vector<std::string> labels;
  for (const auto& r : run.before.mean) {
    rows.push_back(r);
    labels.push_back("nominal" + side_label(cfg, r.robot));
  }
  for (const auto& r : run.after.mean) {
    rows.push_back(r);
    labels.push_back("identified" + side_label(cfg, r.robot));
  }
  os << fidelity_table(rows, labels);
  for (std::size_t r = 0; r < run.before.mean.size(); ++r) {
    const double a = run.before.mean[r].F, b = run.after.mean[r].F;
    os << "F_EE RMSE change robot " << r << ": " << fmt(a > 0 ? 100 * (1 - b / a) : 0, 3)
       << "% lower\n";
  }
  os << check_lines(run.checks);
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_task_dir(const std::string& dir, const ScenarioConfig& cfg, const TaskRun& run, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/config.yaml", dump_scenario(cfg));
  for (std::size_t t = 0; t < run.sim.size(); ++t) {
    run.sim[t].write_csv(dir + "/" + prefix + "trial" + std::to_string(t) + "_sim.csv");
    run.ref[t].write_csv(dir + "/" + prefix + "trial" + std::to_string(t) + "_ref.csv");
  }
  write_file(dir + "/" + prefix + "report.json", task_json(cfg, run));
  write_file(dir + "/" + prefix + "report.txt", task_text(cfg, run));
}

TaskRun reload_task_dir(const std::string& dir, const std::string& prefix) {
  const ScenarioConfig cfg = load_scenario(dir + "/config.yaml");
  TaskRun run;
  for (int t = 0; t < cfg.trials; ++t) {
    run.sim.push_back(Trace::read_csv(dir + "/" + prefix + "trial" + std::to_string(t) + "_sim.csv"));
    run.ref.push_back(Trace::read_csv(dir + "/" + prefix + "trial" + std::to_string(t) + "_ref.csv"));
  }
  fill_reports(run);
  return run;
}

ControlEndpoint::ControlEndpoint(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

ControlEndpoint::~ControlEndpoint() {
  detach();
  if (reader_.joinable()) {
    if (closed_.load()) {
      reader_.join();
    } else {
      reader_.detach();  // blocked on input that may never come
    }
  }
}

void ControlEndpoint::attach(Manager& m) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    manager_ = &m;
  }
  reader_ = std::thread([this] {
    std::string line;
    while (std::getline(in_, line)) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!manager_) break;
      const std::string err = submit(*manager_, line);
      if (!err.empty()) {
        out_ << err << std::endl;
      } else if (line.find_first_not_of(" \t") != std::string::npos &&
                 line.substr(line.find_first_not_of(" \t"), 4) == "stop") {
        stop_sent_.store(true);
        break;
      }
    }
    closed_.store(true);
  });
}

void ControlEndpoint::detach() {
  std::lock_guard<std::mutex> lock(mutex_);
  manager_ = nullptr;
}

void ControlEndpoint::drain(Manager& m) {
  while (auto r = m.poll_reply()) {
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << format_reply(m, *r) << std::endl;
    ++replies_;
  }
}

std::string ControlEndpoint::submit(Manager& m, const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> words;
  for (std::string w; is >> w;) words.push_back(w);
  if (words.empty()) return "";
  std::uint64_t seq = 0;
  if (words[0] == "switch") {
    seq = m.request_switch(std::vector<std::string>(words.begin() + 1, words.end()));
  } else if (words[0] == "set") {
    if (words.size() != 4) return "error usage: set <controllet> <param> <value>";
    double v = 0;
    std::size_t used = 0;
    try {
      v = std::stod(words[3], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != words[3].size()) return "error bad number '" + words[3] + "'";
    seq = m.request_set(words[1], words[2], v);
  } else if (words[0] == "stop") {
    if (words.size() != 1) return "error usage: stop";
    seq = m.request_stop();
  } else {
    return "error unknown command '" + words[0] + "' (switch, set, stop)";
  }
  return seq == 0 ? "error mailbox full" : "";
}

std::string ControlEndpoint::format_reply(const Manager& m, const SwitchRecord& r) {
  std::ostringstream os;
  os << (r.accepted() ? "ok " : "error ") << to_string(r.outcome) << " seq=" << r.seq;
  switch (r.kind) {
    case RequestKind::kSwitch:
      os << " kind=switch";
      break;
    case RequestKind::kSet:
      os << " kind=set";
      break;
    case RequestKind::kStop:
      os << " kind=stop";
      break;
  }
  if (r.outcome == RequestOutcome::kConflict && r.conflict_a >= 0 && r.conflict_b >= 0) {
    os << " robot=" << r.conflict_robot << " between=" << m.controllet(r.conflict_a).name() << "/"
       << m.controllet(r.conflict_b).name();
  }
  os << std::fixed << std::setprecision(3) << " latency_ms=" << r.latency_ms << " ticks=" << r.latency_ticks;
  return os.str();
}

}  // namespace mmctl
