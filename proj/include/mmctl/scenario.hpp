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

// End-to-end runs built from a scenario: plants, manager and target stream
// wired together, looped in virtual or wall-clock time, and reduced to
// fidelity, timing, delay, switching and identification reports.
#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mmctl/config.hpp"
#include "mmctl/metrics.hpp"
#include "mmctl/sysid.hpp"

namespace mmctl {

enum class PlantRole { kSim, kReference };

// One named invariant assertion and its outcome.
struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

bool all_passed(const std::vector<Check>& checks);
std::string check_lines(const std::vector<Check>& checks);

// Nominal model named by the scenario (the built-in arm when unset).
RobotModel scenario_model(const ScenarioConfig& cfg);

// Per-robot start posture and world end-effector pose.
std::vector<RobotStart> scenario_starts(const ScenarioConfig& cfg, const RobotModel& model);

WorldConfig world_config(const ScenarioConfig& cfg, const RobotModel& model, PlantRole role,
                         const RobotModel* sim_physics, std::uint64_t seed);

// Per-trial seed shared by the sim and reference runs of that trial.
std::uint64_t trial_seed(std::uint64_t seed, int trial);

struct RunOptions {
  PlantRole role = PlantRole::kReference;
  const RobotModel* sim_physics = nullptr;  // replaces the nominal sim physics
  std::uint64_t seed = 1;
  TimeMode mode = TimeMode::kVirtual;
  bool record_timing = false;
  // Replaces the task's target stream when set.
  std::function<void(double, std::span<TargetSlot>)> targets;
  // Called before every tick with the tick index; may submit requests.
  std::function<void(long, Manager&)> before_tick;
  // Called after every tick; may read replies.
  std::function<void(long, Manager&)> after_tick;
};

struct RunResult {
  Trace trace;
  ManagerHealth health;
  std::vector<SwitchRecord> switches;
  std::vector<double> timing_us;
  long ticks = 0;            // ticks the manager computed
  long missed = 0;           // wall-clock plant steps without a fresh command
  bool faulted = false;      // the plant diverged; the trace ends there
  bool stopped = false;      // a stop request ended the run early
  std::vector<std::string> final_active;
};

// Runs cfg.duration seconds of the scenario on one plant instance.
RunResult run_scenario(const ScenarioConfig& cfg, const RobotModel& model, const RunOptions& opt);

struct TaskRun {
  std::vector<std::vector<FidelityReport>> trials;  // [trial][robot]
  std::vector<FidelityReport> mean;                  // per robot
  std::vector<Trace> sim, ref;                       // per trial
  std::vector<ManagerHealth> health;                 // sim and ref per trial
  std::vector<Check> checks;
  bool valid = true;
};

// Sim and reference runs per trial with identical targets and seeds.
TaskRun run_task(const ScenarioConfig& cfg, const RobotModel& model, const RobotModel* sim_physics = nullptr);

// Fidelity reports recomputed from stored traces.
void fill_reports(TaskRun& run);

struct SwitchTestResult {
  std::vector<SwitchRecord> records;
  std::vector<std::string> requested;  // set names per record
  ManagerHealth health;
  long ticks = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int min_ticks = 0;
  int max_ticks = 0;
  std::vector<Check> checks;
};

// Random valid switches among joint and Cartesian controllets on the
// scenario's two arms, cfg.switching.trials of them.
SwitchTestResult run_switch_test(const ScenarioConfig& cfg, const RobotModel& model);

struct BenchRun {
  BenchCondition condition = BenchCondition::kNF;
  TimingSummary timing;
  std::vector<double> timing_us;  // one compute time per tick
  long samples = 0;
  double overrun_rate = 0.0;  // fraction of ticks over dt (wall clock) or missed
  std::vector<DelayEstimate> delay;  // per robot
  double expected_delay_ms = 0.0;
  Trace trace;
  ManagerHealth health;
  std::vector<Check> checks;
};

BenchRun run_benchmark(const ScenarioConfig& cfg, const RobotModel& model);

struct IdentificationRun {
  IdentifyResult fit;
  RobotModel identified;
  Excitation excitation;
  Trace excitation_trace;
  std::size_t samples = 0;
  TaskRun before, after;
  double heldout_before = 0.0;  // N·m, torque prediction on the reference's true dynamics
  double heldout_after = 0.0;
  std::vector<Check> checks;
};

// Excites robot 0 of the reference plant above its start pose, identifies
// its inertial parameters, and re-runs the task with the identified model
// as sim physics.
IdentificationRun run_identification(const ScenarioConfig& cfg, const RobotModel& model);

// Posture whose end-effector sits dz above that of q (damped least squares
// on position, orientation free).
VecN lifted_posture(const RobotModel& model, const VecN& q, double dz);

// Reports, machine-readable (JSON) and human-readable.
std::string task_json(const ScenarioConfig& cfg, const TaskRun& run);
std::string task_text(const ScenarioConfig& cfg, const TaskRun& run);
std::string bench_json(const ScenarioConfig& cfg, const BenchRun& run, const SwitchTestResult& sw);
std::string bench_text(const ScenarioConfig& cfg, const BenchRun& run, const SwitchTestResult& sw);
std::string switch_json(const SwitchTestResult& sw);
std::string switch_text(const SwitchTestResult& sw);
std::string identification_json(const ScenarioConfig& cfg, const IdentificationRun& run);
std::string identification_text(const ScenarioConfig& cfg, const IdentificationRun& run);

// Run directories: config.yaml, traces, report.json, report.txt.
void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);
void write_task_dir(const std::string& dir, const ScenarioConfig& cfg, const TaskRun& run,
                    const std::string& prefix = "");

// Rebuilds the task report of a run directory from its config snapshot and
// traces. The trace file names follow write_task_dir.
TaskRun reload_task_dir(const std::string& dir, const std::string& prefix = "");

// Text control endpoint. Lines: "switch <name>...", "set <c> <p> <v>",
// "stop". Each reply is one line.
class ControlEndpoint {
 public:
  ControlEndpoint(std::istream& in, std::ostream& out);
  ~ControlEndpoint();
  ControlEndpoint(const ControlEndpoint&) = delete;
  ControlEndpoint& operator=(const ControlEndpoint&) = delete;

  // Starts the reader thread that submits parsed requests to m; detach
  // before m is destroyed.
  void attach(Manager& m);
  void detach();
  // Writes the replies the manager has published; call from the tick side.
  void drain(Manager& m);
  bool input_closed() const { return closed_.load(); }
  // A "stop" line was queued; the reader exits after it.
  bool stop_sent() const { return stop_sent_.load(); }
  std::size_t replies() const { return replies_; }

  // Submits one line; returns an error reply for malformed input, empty
  // when the request was queued.
  static std::string submit(Manager& m, const std::string& line);
  static std::string format_reply(const Manager& m, const SwitchRecord& r);

 private:
  std::istream& in_;
  std::ostream& out_;
  std::mutex mutex_;  // guards manager_ and out_
  Manager* manager_ = nullptr;
  std::atomic<bool> closed_{false};
  std::atomic<bool> stop_sent_{false};
  std::size_t replies_ = 0;
  std::thread reader_;
};

}  // namespace mmctl
