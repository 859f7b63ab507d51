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

// Acceptance run: one PASS/FAIL line per criterion, exit 0 only when all
// pass. Each criterion also carries its wall-clock runtime limit.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmctl/collision.hpp"
#include "mmctl/control_terms.hpp"
#include "mmctl/kinematics.hpp"
#include "mmctl/parallel.hpp"
#include "mmctl/plant.hpp"
#include "mmctl/scenario.hpp"
#include "mmctl/sysid.hpp"
#include "mmctl/ufic.hpp"

using namespace mmctl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

VecN random_q(const RobotModel& m, std::mt19937& rng, double margin = 0.05) {
  VecN q(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    const double lo = std::max(m.joints[i].lower, -3.0) + margin;
    const double hi = std::min(m.joints[i].upper, 3.0) - margin;
    q[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return q;
}

VecN random_vec(int n, std::mt19937& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  VecN v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

std::vector<Transform> bases_of(const ScenarioConfig& cfg) {
  std::vector<Transform> out;
  for (const auto& r : cfg.robots) out.push_back(Transform::from_xyz_rpy(r.xyz, r.rpy));
  return out;
}

// 1. Switching latency in virtual time.
Outcome switching() {
  ScenarioConfig cfg = bench_defaults(BenchCondition::kNF);
  cfg.switching.trials = 50;
  const SwitchTestResult sw = run_switch_test(cfg, scenario_model(cfg));
  const bool pass = all_passed(sw.checks) && sw.records.size() == 50 && sw.max_ticks <= 2 &&
                    sw.health.stamp_gaps == 0;
  return {pass, fmt("%zu switches, %d..%d ticks, mean %.3f ms, std %.3f ms, %ld unstamped ticks",
                    sw.records.size(), sw.min_ticks, sw.max_ticks, sw.mean_ms, sw.std_ms,
                    sw.health.stamp_gaps)};
}

// 2. Loop budget in wall-clock mode; the budgets are recorded, the
// ordering asserted.
Outcome loop_budget() {
  double mean[2] = {0, 0};
  long samples[2] = {0, 0};
  const BenchCondition conds[2] = {BenchCondition::kNF, BenchCondition::kCAMA};
  const double budget[2] = {100.0, 250.0};
  for (int i = 0; i < 2; ++i) {
    ScenarioConfig cfg = bench_defaults(conds[i]);
    cfg.time_mode = TimeMode::kWallClock;
    cfg.duration = 3.0;
    const BenchRun run = run_benchmark(cfg, scenario_model(cfg));
    mean[i] = run.timing.mean;
    samples[i] = run.samples;
  }
  const bool pass = samples[0] > 0 && samples[1] > 0 && mean[0] <= mean[1];
  return {pass, fmt("NF %.1f us (budget %.0f, %s), CA-MA %.1f us (budget %.0f, %s); NF <= CA-MA", mean[0],
                    budget[0], mean[0] <= budget[0] ? "within" : "over", mean[1], budget[1],
                    mean[1] <= budget[1] ? "within" : "over")};
}

double broadband(double t) {
  return std::sin(2 * std::numbers::pi * 1.3 * t) + 0.6 * std::sin(2 * std::numbers::pi * 4.7 * t + 0.4) +
         0.3 * std::sin(2 * std::numbers::pi * 11.1 * t + 1.1);
}

// 3. Delay estimation: the benchmark trace and a synthetic shift grid.
Outcome delay() {
  ScenarioConfig cfg = bench_defaults(BenchCondition::kNF);
  const BenchRun run = run_benchmark(cfg, scenario_model(cfg));
  bool pass = all_passed(run.checks) && !run.delay.empty();
  std::string d = fmt("benchmark (%.0f s): injected %.2f ms, estimated", cfg.duration, run.expected_delay_ms);
  for (const auto& e : run.delay) {
    pass = pass && std::abs(e.ms - run.expected_delay_ms) <= 0.5;
    d += fmt(" %.4f", e.ms);
  }
  d += " ms";

  TimeSeries a;
  for (int k = 0; k <= 2000; ++k) {
    a.t.push_back(k * 1e-3);
    a.v.push_back(broadband(k * 1e-3));
  }
  double worst = 0.0;
  int shifts = 0;
  bool grid_ok = true;
  for (double s_ms = -20.0; s_ms <= 20.0 + 1e-9; s_ms += 0.25, ++shifts) {
    TimeSeries b;
    b.t = a.t;
    for (double t : a.t) b.v.push_back(broadband(t - s_ms * 1e-3));
    const DelayEstimate e = estimate_delay(a, b);
    worst = std::max(worst, std::abs(e.ms - s_ms));
    grid_ok = grid_ok && std::abs(e.ms - s_ms) <= e.step_ms;
  }
  d += fmt("; %d synthetic shifts in [-20, 20] ms, worst error %.4f ms (interval 1 ms)", shifts, worst);
  return {pass && grid_ok, d};
}

// 4. Identical plant sides give zero gap on Tasks 1-4.
Outcome zero_gap() {
  bool pass = true;
  double worst = 0.0;
  for (int id = 1; id <= 4; ++id) {
    ScenarioConfig cfg = task_defaults(id);
    cfg.duration = 10.0;
    cfg.trials = 1;
    cfg.plant.reference = cfg.plant.sim;
    const TaskRun run = run_task(cfg, scenario_model(cfg));
    pass = pass && all_passed(run.checks);
    for (const auto& r : run.mean) {
      for (double v : {r.q, r.qd, r.tau, r.x, r.F, r.c_err}) {
        worst = std::max(worst, v);
        pass = pass && r.valid && v < 1e-9;
      }
    }
  }
  return {pass, fmt("max RMSE over six channels and Tasks 1-4: %.3g", worst)};
}

// 5. Default perturbation and noise give plausible gap magnitudes.
Outcome gap_bands() {
  bool pass = true;
  std::string d;
  for (int id = 1; id <= 4; ++id) {
    const ScenarioConfig cfg = task_defaults(id);
    const TaskRun run = run_task(cfg, scenario_model(cfg));
    const FidelityReport& r = run.mean[0];
    const bool ok = all_passed(run.checks) && r.valid && r.q >= 1e-4 && r.q <= 0.2 && r.x >= 1e-4 &&
                    r.x <= 0.05 && r.qd > 0 && r.tau > 0 && r.F > 0 && r.c_err > 0;
    pass = pass && ok;
    d += fmt("%sT%d q %.4f rad x %.4f m", id > 1 ? ", " : "", id, r.q, r.x);
  }
  return {pass, d + " (5 trials x 10 s each)"};
}

// 6. Identification reduces the Task 4 force gap.
Outcome identification() {
  const ScenarioConfig cfg = task_defaults(4);
  const IdentificationRun run = run_identification(cfg, scenario_model(cfg));
  const FidelityReport& b = run.before.mean[0];
  const FidelityReport& a = run.after.mean[0];
  const double reduction = 1.0 - a.F / b.F;
  const bool pass = all_passed(run.checks) && reduction >= 0.30 && a.tau <= 1.05 * b.tau &&
                    a.c_err <= 1.05 * b.c_err;
  return {pass, fmt("F %.3f -> %.3f N (%.1f%% lower), tau %.4f -> %.4f N.m, C_err %.4f -> %.4f N.m", b.F, a.F,
                    100 * reduction, b.tau, a.tau, b.c_err, a.c_err)};
}

// 7. Dynamics identities against finite-difference and recursive oracles.
Outcome dynamics_identities() {
  const RobotModel& m = default_model();
  std::mt19937 rng(7);
  std::vector<VecN> qs;
  for (int i = 0; i < 10000; ++i) qs.push_back(random_q(m, rng, 0.0));
  const MassMatrixCheck mc = batch_mass_matrix_check(m, qs, Exec::kParallel);
  const bool spd = mc.max_asymmetry < 1e-10 && mc.min_eigenvalue > 0.0;

  const double h = 1e-6;
  double jac_err = 0.0, grav_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const VecN q = random_q(m, rng);
    const Jac J = jacobian(m, q);
    const VecN g = gravity_torque(m, q);
    for (int i = 0; i < m.dof(); ++i) {
      VecN qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const CartesianState xp = forward_kinematics(m, qp), xm = forward_kinematics(m, qm);
      Vec6 fd;
      fd.head<3>() = (xp.position - xm.position) / (2 * h);
      fd.tail<3>() = rotation_log(xp.orientation.toRotationMatrix() * xm.orientation.toRotationMatrix().transpose()) /
                     (2 * h);
      jac_err = std::max(jac_err, (fd - J.col(i)).cwiseAbs().maxCoeff());
      const double gfd = (potential_energy(m, qp) - potential_energy(m, qm)) / (2 * h);
      grav_err = std::max(grav_err, std::abs(gfd - g[i]));
    }
  }

  Perturbation p;
  p.mass = {1, 1, 1, 1.15, 1.15, 1.15, 1.15};
  const RobotModel heavy = perturb(m, p);
  double reg_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const RobotModel& model = trial % 2 ? heavy : m;
    const VecN q = random_q(model, rng), qd = random_vec(model.dof(), rng, 1.5),
               qdd = random_vec(model.dof(), rng, 4.0);
    const VecN got = regressor(model, q, qd, qdd) * extract_parameters(model);
    reg_err = std::max(reg_err, (got - rnea(model, q, qd, qdd)).cwiseAbs().maxCoeff());
  }
  const bool pass = spd && jac_err < 1e-5 && grav_err < 1e-5 && reg_err < 1e-8;
  return {pass, fmt("M: 10000 configs, asymmetry %.2g, min eigenvalue %.3g; Jacobian-FK %.2g; gravity-potential "
                    "%.2g; regressor-RNEA %.2g N.m over 1000 samples",
                    mc.max_asymmetry, mc.min_eigenvalue, jac_err, grav_err, reg_err)};
}

// 8. Tank bounds over randomized closed-loop Task 3/4 runs, and exact
// gating of the force channel.
Outcome tanks() {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long ticks = 0, violations = 0, empty_ticks = 0;
  int runs = 0;
  for (int run = 0; run < 100; ++run) {
    ScenarioConfig cfg = task_defaults(run % 2 ? 4 : 3);
    cfg.duration = 2.0;
    cfg.trials = 1;
    cfg.seed = 1000 + run;
    cfg.task.force_peak = 10.0 + 30.0 * u(rng);
    cfg.task.force_period = 2.0;
    cfg.task.contact_force = 5.0 + 15.0 * u(rng);
    cfg.task.contact_period = 2.0;
    UficGains& g = cfg.controllets[0].params.ufic;
    g.E_max = std::pow(10.0, -2.0 + 4.0 * u(rng));
    g.E_min = g.E_max * 0.1 * u(rng);
    g.K_p = Vec6::Constant(0.05 + 0.5 * u(rng));
    g.K_i = Vec6::Constant(10.0 * u(rng));
    g.tank_fade = 0.05 + 0.5 * u(rng);
    g.d_max = 0.01 + 0.1 * u(rng);
    g.tank_gain = 10.0 + 400.0 * u(rng);
    cfg.validate(default_model().dof());
    RunOptions o;
    o.seed = trial_seed(cfg.seed, 0);
    o.after_tick = [&](long, Manager& m) {
      for (int i = 0; i < m.controllet_count(); ++i) {
        const UficState* s = m.controllet(i).force_state(0);
        if (!s) continue;
        ++ticks;
        const bool ok = s->E_f >= g.E_min && s->E_f <= g.E_max && s->E_i >= g.E_min && s->E_i <= g.E_max &&
                        s->gamma_f >= 0 && s->gamma_f <= 1 && s->alpha_f >= 0 && s->alpha_f <= 1 &&
                        s->alpha_i >= 0 && s->alpha_i <= 1;
        if (!ok) ++violations;
        if (s->E_f <= g.E_min || s->E_i <= g.E_min) ++empty_ticks;
      }
    };
    const RunResult r = run_scenario(cfg, scenario_model(cfg), o);
    if (!r.faulted) ++runs;
  }

  // Empty tank, never in contact (gamma_f = 0): the shaped force output is
  // exactly zero for any PID output.
  std::normal_distribution<double> n(0.0, 1.0);
  long nonzero = 0;
  for (int k = 0; k < 10000; ++k) {
    UficGains g;
    g.E_max = 1.0 + 99.0 * u(rng);
    g.E_min = g.E_max * 0.1 * u(rng);
    UficState s;
    s.E_f = g.E_min;
    Vec6 F_d = Vec6::Zero(), F = Vec6::Zero();
    for (int i = 0; i < 6; ++i) {
      F_d[i] = 20.0 * n(rng);
      F[i] = 0.9 * g.contact_threshold / std::sqrt(6.0) * (2.0 * u(rng) - 1.0);  // below contact
    }
    CartesianState x;
    x.position = Vec3(n(rng), n(rng), n(rng));
    const UficOutput out = ufic_wrench(s, g, F_d, F, x, 1e-3);
    if (out.state.gamma_f != 0.0 || !out.wrench.isZero(0.0)) ++nonzero;
  }
  const bool pass = runs == 100 && ticks > 0 && violations == 0 && nonzero == 0;
  return {pass, fmt("%d/100 runs stable, %ld ticks checked, %ld out of bounds, %ld at an empty tank; "
                    "gated output nonzero in %ld of 10000 cases",
                    runs, ticks, violations, empty_ticks, nonzero)};
}

// 9. Controller null cases, compared exactly.
Outcome null_cases() {
  const RobotModel& m = default_model();
  std::mt19937 rng(9);

  // Identity bases keep the world/base round trip free of rounding.
  std::vector<Transform> bases(2);
  std::vector<PlantOutput> sensors(2);
  std::vector<TargetSlot> targets(2);
  const VecN q_rest = random_q(m, rng);
  for (int r = 0; r < 2; ++r) {
    sensors[r].state.q = q_rest;
    sensors[r].state.qd = VecN::Zero(m.dof());
    const CartesianState x = forward_kinematics(m, sensors[r].state.q);
    targets[r].pose.position = x.position;
    targets[r].pose.orientation = x.orientation;
    targets[r].q = sensors[r].state.q;
    targets[r].qd = VecN::Zero(m.dof());
  }
  ControlletDescriptor dc;
  dc.name = "DC";
  dc.type = ControlletType::kCartesian;
  dc.robots = {0, 1};
  dc.params.q_dN = q_rest;
  Manager mgr({dc}, {"DC"}, SharedRobotBus(std::vector<const RobotModel*>(2, &m), bases));
  mgr.tick(0, sensors, targets);
  bool cmd_ok = true;
  for (int r = 0; r < 2; ++r) {
    const RobotSlot& s = mgr.bus().robot(r);
    cmd_ok = cmd_ok && s.terms.task.isZero(0.0) && s.terms.null.isZero(0.0) && s.tau_cmd == s.terms.cor;
  }

  bool null_ok = true, ma_ok = true;
  int ma_checked = 0;
  ImpedanceGains g = make_impedance_gains(m);
  ManipulabilityConfig mcfg;
  for (int k = 0; k < 1000; ++k) {
    JointState st;
    st.q = random_q(m, rng);
    st.qd = VecN::Zero(m.dof());
    g.q_dN = st.q;
    null_ok = null_ok && nullspace_torque(dynamics(m, st), st, g).isZero(0.0);
    if (k < 300 && manipulability(jacobian(m, st.q)).value > mcfg.m_0) {
      ++ma_checked;
      ma_ok = ma_ok && manipulability_torque(m, st.q, mcfg).tau.isZero(0.0);
    }
  }

  const ScenarioConfig pair = bench_defaults(BenchCondition::kCA);
  const std::vector<Transform> pb = bases_of(pair);
  CollisionAvoidance ca(CollisionConfig{}, 2);
  int ca_checked = 0, ca_near = 0;
  bool ca_ok = true;
  for (int k = 0; k < 2000; ++k) {
    const ChainFrames f0 = compute_frames(m, random_q(m, rng)), f1 = compute_frames(m, random_q(m, rng));
    const CollisionBody bodies[2] = {{&m, &f0, pb[0]}, {&m, &f1, pb[1]}};
    VecN tau[2] = {VecN::Zero(m.dof()), VecN::Zero(m.dof())};
    double dmin = 0.0;
    ca.accumulate(bodies, tau, &dmin);
    if (dmin < CollisionConfig{}.threshold) {
      ++ca_near;
      continue;
    }
    ++ca_checked;
    ca_ok = ca_ok && tau[0].isZero(0.0) && tau[1].isZero(0.0);
  }
  const bool pass = cmd_ok && null_ok && ma_ok && ma_checked > 0 && ca_ok && ca_checked > 0;
  return {pass, fmt("tau_cmd == tau_cor at rest on target: %s; tau_null == 0 at q_dN (1000): %s; tau_ma == 0 above "
                    "m_0 (%d): %s; tau_ca == 0 beyond 5 cm (%d, %d closer skipped): %s",
                    cmd_ok ? "yes" : "no", null_ok ? "yes" : "no", ma_checked, ma_ok ? "yes" : "no", ca_checked,
                    ca_near, ca_ok ? "yes" : "no")};
}

bool same_tree(const std::string& a, const std::string& b, int* files) {
  *files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    const auto other = std::filesystem::path(b) / name;
    if (!std::filesystem::exists(other) || read_file(e.path().string()) != read_file(other.string())) return false;
    ++*files;
  }
  return *files > 0;
}

// 10. Same seed, bit-identical trace files.
Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "mmctl_acceptance_determinism";
  bool pass = true;
  int total = 0;
  for (int id : {3, 4, 5}) {
    ScenarioConfig cfg = task_defaults(id);
    cfg.duration = 3.0;
    cfg.trials = 2;
    cfg.seed = 77;
    std::string dirs[2];
    for (int rep = 0; rep < 2; ++rep) {
      dirs[rep] = (root / fmt("task%d_%d", id, rep)).string();
      std::filesystem::remove_all(dirs[rep]);
      std::filesystem::create_directories(dirs[rep]);
      write_task_dir(dirs[rep], cfg, run_task(cfg, scenario_model(cfg)));
    }
    int files = 0;
    pass = pass && same_tree(dirs[0], dirs[1], &files);
    total += files;
  }
  for (BenchCondition c : {BenchCondition::kCAMA, BenchCondition::kCMA}) {
    ScenarioConfig cfg = bench_defaults(c);
    cfg.duration = 2.0;
    const std::string a = run_benchmark(cfg, scenario_model(cfg)).trace.to_csv();
    const std::string b = run_benchmark(cfg, scenario_model(cfg)).trace.to_csv();
    pass = pass && a == b;
    total += 1;
  }
  std::filesystem::remove_all(root);
  return {pass, fmt("%d trace, config and report files identical across repeated runs", total)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 when the criterion has no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "switching latency", 10.0, switching},
      {2, "loop budget", 0.0, loop_budget},
      {3, "delay estimation", 30.0, delay},
      {4, "zero-gap fidelity", 120.0, zero_gap},
      {5, "gap magnitudes", 0.0, gap_bands},
      {6, "identification improvement", 300.0, identification},
      {7, "dynamics identities", 0.0, dynamics_identities},
      {8, "tank passivity", 0.0, tanks},
      {9, "controller null cases", 0.0, null_cases},
      {10, "determinism", 0.0, determinism},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0.0 || s < c.limit_s;
    const bool pass = o.pass && in_time;
    all = all && pass;
    std::string timing = fmt("%.1f s", s);
    if (c.limit_s > 0.0) timing += fmt(" of %.0f s", c.limit_s);
    std::printf("%s criterion %d %s: %s [%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%s\n", all ? "all criteria passed" : "some criteria failed");
  return all ? 0 : 1;
}
