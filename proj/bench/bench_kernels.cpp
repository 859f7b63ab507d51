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

// Serial reference against OpenMP batch kernels, plus the single-threaded
// cost of one control tick per benchmark condition.
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "mmctl/config.hpp"
#include "mmctl/kinematics.hpp"
#include "mmctl/manager.hpp"
#include "mmctl/parallel.hpp"
#include "mmctl/sysid.hpp"

using namespace mmctl;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::kParallel : Exec::kSerial; }

VecN random_q(const RobotModel& m, std::mt19937& rng) {
  VecN q(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    q[i] = std::uniform_real_distribution<double>(std::max(m.joints[i].lower, -2.5),
                                                  std::min(m.joints[i].upper, 2.5))(rng);
  }
  return q;
}

void BM_NormalEquations(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  std::mt19937 rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd Y(rows, 70);
  Eigen::VectorXd y(rows);
  for (int i = 0; i < Y.size(); ++i) Y.data()[i] = n(rng);
  for (int i = 0; i < rows; ++i) y[i] = n(rng);
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  for (auto _ : state) {
    normal_equations(Y, y, exec_of(state), &A, &b);
    benchmark::DoNotOptimize(A.data());
  }
}
BENCHMARK(BM_NormalEquations)->ArgsProduct({{7000, 28000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_CorrelationScan(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = std::sin(0.01 * i) + 0.1 * g(rng);
    b[i] = std::sin(0.01 * (i - 3)) + 0.1 * g(rng);
  }
  for (auto _ : state) {
    auto c = correlation_scan(a, b, 100, exec_of(state));
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_CorrelationScan)->ArgsProduct({{10000, 60000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_MassMatrixCheck(benchmark::State& state) {
  const RobotModel& m = default_model();
  std::mt19937 rng(3);
  std::vector<VecN> qs;
  for (int i = 0; i < state.range(0); ++i) qs.push_back(random_q(m, rng));
  for (auto _ : state) {
    auto r = batch_mass_matrix_check(m, qs, exec_of(state));
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_MassMatrixCheck)->ArgsProduct({{1000, 10000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_StackRegressor(benchmark::State& state) {
  const RobotModel& m = default_model();
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  std::vector<RegressorSample> samples;
  for (int i = 0; i < state.range(0); ++i) {
    RegressorSample s;
    s.q = random_q(m, rng);
    s.qd = VecN::NullaryExpr(m.dof(), [&] { return g(rng); });
    s.qdd = VecN::NullaryExpr(m.dof(), [&] { return g(rng); });
    s.tau = VecN::NullaryExpr(m.dof(), [&] { return g(rng); });
    samples.push_back(s);
  }
  Eigen::MatrixXd Y;
  Eigen::VectorXd y;
  for (auto _ : state) {
    stack_regressor(m, samples, exec_of(state), &Y, &y);
    benchmark::DoNotOptimize(Y.data());
  }
}
BENCHMARK(BM_StackRegressor)->ArgsProduct({{1000, 4000}, {0, 1}})->Unit(benchmark::kMillisecond);

// One manager tick on two arms at rest; range(0) indexes kAllConditions.
void BM_Tick(benchmark::State& state) {
  const BenchCondition c = kAllConditions[state.range(0)];
  const ScenarioConfig cfg = bench_defaults(c);
  const RobotModel& m = default_model();
  std::vector<Transform> bases;
  std::vector<PlantOutput> sensors;
  std::vector<TargetSlot> targets;
  for (const auto& r : cfg.robots) {
    const Transform base = Transform::from_xyz_rpy(r.xyz, r.rpy);
    bases.push_back(base);
    PlantOutput o;
    o.state.q = m.home;
    o.state.qd = VecN::Zero(m.dof());
    sensors.push_back(o);
    const CartesianState x = forward_kinematics(m, m.home);
    TargetSlot t;
    t.pose.position = base.apply(x.position) + Vec3(0, 0, 0.01);
    t.pose.orientation = Quat(base.rotation) * x.orientation;
    t.q = m.home;
    t.qd = VecN::Zero(m.dof());
    targets.push_back(t);
  }
  std::vector<std::string> active;
  for (const auto& d : cfg.controllets) active.push_back(d.name);
  Manager mgr(cfg.controllets, active,
              SharedRobotBus(std::vector<const RobotModel*>(bases.size(), &m), bases));
  long k = 0;
  for (auto _ : state) {
    mgr.tick(k++, sensors, targets);
    benchmark::DoNotOptimize(mgr.command(0).data());
  }
  state.SetLabel(to_string(c));
}
BENCHMARK(BM_Tick)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
