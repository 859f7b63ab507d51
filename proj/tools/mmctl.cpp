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

// Scenario runner. Exit status: 0 when every invariant check passed, 1 when
// one failed, 2 for usage, configuration or I/O errors.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmctl/scenario.hpp"

using namespace mmctl;
using Json = nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string time_mode;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "scenario file");
  app->add_option("--seed", c.seed, "override the scenario seed");
  app->add_option("--time-mode", c.time_mode, "virtual or wall");
  app->add_option("--out", c.out, "run directory");
}

void apply_common(const Common& c, ScenarioConfig& cfg) {
  if (c.seed) cfg.seed = *c.seed;
  if (!c.time_mode.empty()) cfg.time_mode = parse_time_mode(c.time_mode);
  if (!c.out.empty()) cfg.out = c.out;
}

ScenarioConfig load_or(const Common& c, ScenarioConfig fallback) {
  ScenarioConfig cfg = c.config.empty() ? std::move(fallback) : load_scenario(c.config);
  apply_common(c, cfg);
  return cfg;
}

int verdict(bool passed) {
  std::cout << (passed ? "all checks passed\n" : "some checks failed\n");
  return passed ? 0 : 1;
}

int run_task_verb(const Common& c, int task, std::optional<int> trials, std::optional<double> duration) {
  ScenarioConfig cfg = load_or(c, task_defaults(task));
  if (trials) cfg.trials = *trials;
  if (duration) cfg.duration = *duration;
  const RobotModel model = scenario_model(cfg);
  const TaskRun run = run_task(cfg, model);
  write_task_dir(cfg.out, cfg, run);
  std::cout << task_text(cfg, run) << "run directory: " << cfg.out << "\n";
  return verdict(all_passed(run.checks));
}

void write_bench_dir(const std::string& dir, const ScenarioConfig& cfg, const BenchRun& b,
                     const SwitchTestResult& sw) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/config.yaml", dump_scenario(cfg));
  b.trace.write_csv(dir + "/trace.csv");
  std::ostringstream t;
  t << std::setprecision(17) << "compute_us\n";
  for (double v : b.timing_us) t << v << "\n";
  write_file(dir + "/timing.csv", t.str());
  write_file(dir + "/report.json", bench_json(cfg, b, sw));
  write_file(dir + "/report.txt", bench_text(cfg, b, sw));
}

int run_bench_verb(const Common& c, const std::string& condition, std::optional<double> duration) {
  std::vector<ScenarioConfig> cfgs;
  if (!c.config.empty()) {
    cfgs.push_back(load_or(c, {}));
  } else if (condition == "all") {
    for (BenchCondition b : kAllConditions) cfgs.push_back(load_or(c, bench_defaults(b)));
  } else {
    cfgs.push_back(load_or(c, bench_defaults(parse_condition(condition))));
  }
  const std::string root = c.out.empty() ? (cfgs.size() > 1 ? std::string("runs/bench") : cfgs[0].out) : c.out;
  bool passed = true;
  std::map<BenchCondition, double> means;
  std::optional<SwitchTestResult> sw;
  for (ScenarioConfig& cfg : cfgs) {
    if (duration) cfg.duration = *duration;
    if (!cfg.benchmark) throw ContractError("run-bench needs a benchmark scenario");
    const RobotModel model = scenario_model(cfg);
    // The switch test does not depend on the condition; run it once.
    if (!sw) sw = run_switch_test(cfg, model);
    BenchRun b = run_benchmark(cfg, model);
    const std::string dir = cfgs.size() > 1 ? root + "/" + to_string(*cfg.benchmark) : root;
    write_bench_dir(dir, cfg, b, *sw);
    std::cout << bench_text(cfg, b, *sw) << "run directory: " << dir << "\n\n";
    means[*cfg.benchmark] = b.timing.mean;
    passed = passed && all_passed(b.checks);
  }
  passed = passed && all_passed(sw->checks);
  if (means.count(BenchCondition::kNF) && means.count(BenchCondition::kCAMA)) {
    const bool ordered = means[BenchCondition::kNF] <= means[BenchCondition::kCAMA];
    std::cout << (ordered ? "PASS" : "FAIL") << " mean loop time NF <= CA-MA: " << means[BenchCondition::kNF]
              << " us vs " << means[BenchCondition::kCAMA] << " us\n";
    passed = passed && ordered;
  }
  return verdict(passed);
}

int identify_verb(const Common& c, int task) {
  ScenarioConfig cfg = load_or(c, task_defaults(task));
  const RobotModel model = scenario_model(cfg);
  const IdentificationRun run = run_identification(cfg, model);
  const std::string dir = cfg.out;
  write_task_dir(dir, cfg, run.before, "before_");
  write_task_dir(dir, cfg, run.after, "after_");
  run.excitation_trace.write_csv(dir + "/excitation.csv");
  save_model(run.identified, dir + "/identified_model.yaml");
  write_file(dir + "/parameters.txt", parameter_report(run.fit, model));
  write_file(dir + "/report.json", identification_json(cfg, run));
  write_file(dir + "/report.txt", identification_text(cfg, run));
  std::cout << identification_text(cfg, run) << "run directory: " << dir << "\n";
  return verdict(all_passed(run.checks));
}

int switch_verb(const Common& c, bool control) {
  ScenarioConfig cfg = load_or(c, bench_defaults(BenchCondition::kNF));
  const RobotModel model = scenario_model(cfg);
  if (!control) {
    const SwitchTestResult sw = run_switch_test(cfg, model);
    std::filesystem::create_directories(cfg.out);
    write_file(cfg.out + "/config.yaml", dump_scenario(cfg));
    write_file(cfg.out + "/report.json", switch_json(sw));
    write_file(cfg.out + "/report.txt", switch_text(sw));
    std::cout << switch_text(sw) << "run directory: " << cfg.out << "\n";
    return verdict(all_passed(sw.checks));
  }
  // Interactive: the scenario's controllets plus the switch-test registry,
  // paced in wall-clock time, commands from stdin until "stop" or EOF.
  ScenarioConfig sc = cfg;
  if (sc.robots.size() == 2) {
    ControlletDescriptor left;
    left.name = "L";
    left.type = ControlletType::kJointImpedance;
    left.robots = {0};
    ControlletDescriptor right = left;
    right.name = "R";
    right.robots = {1};
    for (const auto& d : {left, right}) {
      bool present = false;
      for (const auto& e : sc.controllets) present = present || e.name == d.name;
      if (!present) sc.controllets.push_back(d);
    }
  }
  sc.time_mode = TimeMode::kWallClock;
  ControlEndpoint endpoint(std::cin, std::cout);
  bool stop_sent = false;
  RunOptions o;
  o.role = PlantRole::kReference;
  o.seed = trial_seed(sc.seed, 0);
  o.mode = TimeMode::kWallClock;
  o.before_tick = [&](long k, Manager& m) {
    if (k == 0) endpoint.attach(m);
  };
  o.after_tick = [&](long, Manager& m) {
    endpoint.drain(m);
    if (endpoint.input_closed() && !endpoint.stop_sent() && !stop_sent && !m.switch_pending()) {
      m.request_stop();
      stop_sent = true;
    }
  };
  std::cout << "controllets:";
  for (const auto& d : sc.controllets) std::cout << " " << d.name;
  std::cout << "\nready" << std::endl;
  const RunResult r = run_scenario(sc, model, o);
  endpoint.detach();
  std::vector<Check> checks;
  checks.push_back({"exclusive ownership", r.health.ownership_violations == 0, ""});
  checks.push_back({"plant stable", !r.faulted, ""});
  // A switch queued behind another starts when that one commits.
  bool latency = true;
  long last_commit = -1;
  int worst = 0;
  for (const auto& s : r.switches) {
    if (s.kind != RequestKind::kSwitch || !s.accepted()) continue;
    const long start = std::max(s.request_tick, last_commit - 1);
    const int ticks = static_cast<int>(s.first_compute_tick - start);
    worst = std::max(worst, ticks);
    latency = latency && ticks <= 2;
    last_commit = s.first_compute_tick;
  }
  checks.push_back({"accepted switches within 2 ticks of dequeue", latency,
                    std::to_string(r.switches.size()) + " requests, worst " + std::to_string(worst)});
  std::cout << check_lines(checks);
  return verdict(all_passed(checks));
}

bool close(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
  }
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!close(a[i], b[i])) return false;
    }
    return true;
  }
  if (a.is_object() && b.is_object()) {
    if (a.size() != b.size()) return false;
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !close(it.value(), b[it.key()])) return false;
    }
    return true;
  }
  return a == b;
}

bool same_reports(const Json& stored, const Json& fresh, const char* what) {
  bool ok = true;
  for (const char* key : {"trials", "mean"}) {
    const bool match = close(stored.at(key), fresh.at(key));
    std::cout << (match ? "PASS " : "FAIL ") << what << " " << key << " reproduced from traces\n";
    ok = ok && match;
  }
  return ok;
}

int report_verb(const Common& c) {
  const std::string dir = c.out.empty() ? c.config : c.out;
  if (dir.empty()) throw ContractError("report needs --out <run directory>");
  const Json stored = Json::parse(read_file(dir + "/report.json"));
  const std::string kind = stored.at("kind");
  const ScenarioConfig cfg = load_scenario(dir + "/config.yaml");
  bool ok = true;
  if (kind == "task") {
    TaskRun run = reload_task_dir(dir);
    run.checks = {{"report valid", run.valid, ""}};
    std::cout << task_text(cfg, run);
    ok = same_reports(stored, Json::parse(task_json(cfg, run)), "task");
  } else if (kind == "identify") {
    for (const char* phase : {"before", "after"}) {
      TaskRun run = reload_task_dir(dir, std::string(phase) + "_");
      std::cout << phase << ":\n" << task_text(cfg, run);
      ok = same_reports(stored.at(phase), Json::parse(task_json(cfg, run)), phase) && ok;
    }
  } else if (kind == "bench") {
    const Trace trace = Trace::read_csv(dir + "/trace.csv");
    for (int r = 0; r < trace.robots(); ++r) {
      const DelayEstimate d = command_delay(trace, r);
      const bool match = close(stored.at("delay")[r].at("ms"), Json(d.ms));
      std::cout << (match ? "PASS " : "FAIL ") << "command delay robot " << r << " reproduced: " << d.ms << " ms\n";
      ok = ok && match;
    }
    std::istringstream csv(read_file(dir + "/timing.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<double> samples;
    while (std::getline(csv, line)) samples.push_back(std::stod(line));
    const TimingSummary t = timing_summary(stored.at("timing").at("label"), samples);
    const bool match = close(stored.at("timing").at("mean_us"), Json(t.mean)) &&
                       close(stored.at("timing").at("p99_us"), Json(t.p99));
    std::cout << timing_table({t}) << (match ? "PASS" : "FAIL") << " loop timing reproduced\n";
    ok = ok && match;
  } else if (kind == "switch") {
    double sum = 0;
    const auto& recs = stored.at("records");
    for (const auto& r : recs) sum += r.at("latency_ms").get<double>();
    const double mean = recs.empty() ? 0.0 : sum / recs.size();
    ok = close(Json(mean), stored.at("mean_ms"));
    std::cout << (ok ? "PASS" : "FAIL") << " switch latency mean reproduced: " << mean << " ms\n";
  } else {
    throw FormatError("unknown report kind '" + kind + "'");
  }
  return verdict(ok);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode torque controller: scenario runner"};
  app.require_subcommand(1);
  Common common;
  int task = 4;
  std::optional<int> trials;
  std::optional<double> duration;
  std::string condition = "all";
  bool control = false;

  auto* rt = app.add_subcommand("run-task", "run a validation task on the sim and reference plants");
  add_common(rt, common);
  rt->add_option("--task", task, "task id 1..5 when no config is given")->check(CLI::Range(1, 5));
  rt->add_option("--trials", trials, "override the trial count");
  rt->add_option("--duration", duration, "override the run length (s)");

  auto* rb = app.add_subcommand("run-bench", "loop timing, command delay and switch test per condition");
  add_common(rb, common);
  rb->add_option("--condition", condition, "NF, CA, MA, CA-MA, C-MA or all");
  rb->add_option("--duration", duration, "override the run length (s)");

  auto* id = app.add_subcommand("identify", "identify the reference plant and re-run the task");
  add_common(id, common);
  id->add_option("--task", task, "task id 1..5 when no config is given")->check(CLI::Range(1, 5));

  auto* rp = app.add_subcommand("report", "regenerate reports of a run directory from its traces");
  add_common(rp, common);

  auto* sw = app.add_subcommand("switch-test", "random switch trials, or stdin commands with --control");
  add_common(sw, common);
  sw->add_flag("--control", control, "read switch/set/stop lines from stdin (wall-clock)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (rt->parsed()) return run_task_verb(common, task, trials, duration);
    if (rb->parsed()) return run_bench_verb(common, condition, duration);
    if (id->parsed()) return identify_verb(common, task);
    if (rp->parsed()) return report_verb(common);
    if (sw->parsed()) return switch_verb(common, control);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
