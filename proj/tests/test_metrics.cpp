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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mmctl/bus.hpp"
#include "mmctl/metrics.hpp"
#include "test_util.hpp"

using namespace mmctl;
using namespace mmctl::testing;

namespace {

constexpr double kDt = 1e-3;

double signal(double t) {
  using std::numbers::pi;
  return std::sin(2 * pi * 3 * t) + 0.6 * std::sin(2 * pi * 7 * t + 0.4) + 0.3 * std::sin(2 * pi * 11 * t + 1.1);
}

TimeSeries sampled(double t0, double t1, double shift, double noise = 0.0, std::mt19937* rng = nullptr) {
  TimeSeries s;
  std::normal_distribution<double> n(0.0, 1.0);
  for (double t = t0; t <= t1 + 1e-12; t += kDt) {
    s.t.push_back(t);
    s.v.push_back(signal(t - shift) + (rng ? noise * n(*rng) : 0.0));
  }
  return s;
}

// One robot with a commanded torque signal, the plant applying it `delay`
// ticks later and reading it `phase` seconds after its tick.
Trace command_trace(int ticks, int dof, int delay, double phase, double noise = 0.0, unsigned seed = 1) {
  Trace t(1, dof);
  t.reserve(ticks);
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  auto cmd = [&](long k) {
    VecN v(dof);
    for (int j = 0; j < dof; ++j) v[j] = (j + 1) * (1.5 + signal(k * kDt + 0.01 * j));
    return v;
  };
  for (int k = 0; k < ticks; ++k) {
    double* r = t.append_row();
    r[0] = k;
    r[1] = k * kDt;
    t.get(k, 0, Channel::kTauCmd) = cmd(k);
    const VecN app = cmd(std::max(0, k - delay));
    t.get(k, 0, Channel::kTauApp) = app;
    auto meas = t.get(k, 0, Channel::kTauMeas);
    for (int j = 0; j < dof; ++j) meas[j] = app[j] + (noise > 0 ? n(rng) : 0.0);
    t.get(k, 0, Channel::kReadTime)[0] = k * kDt + phase;
  }
  return t;
}

Trace random_trace(int robots, int dof, int rows, unsigned seed) {
  Trace t(robots, dof);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int k = 0; k < rows; ++k) {
    double* r = t.append_row();
    r[0] = k;
    r[1] = k * kDt;
    for (int c = 2; c < t.width(); ++c) r[c] = u(rng) * std::pow(10.0, (c % 7) - 3);
  }
  return t;
}

}  // namespace

TEST_CASE("trace CSV round-trips exactly") {
  const Trace t = random_trace(2, 7, 50, 3);
  const Trace back = Trace::parse_csv(t.to_csv());
  CHECK(back.robots() == 2);
  CHECK(back.dof() == 7);
  CHECK(back == t);
  CHECK(t.column("r1.tau_cmd3") == t.offset(1, Channel::kTauCmd) + 3);
  CHECK(t.column("r0.ee_qw") == t.offset(0, Channel::kPose) + 3);
  CHECK(t.column("nope") == -1);
}

TEST_CASE("malformed trace CSV names the line") {
  std::string csv = random_trace(1, 2, 3, 1).to_csv();
  // Drop the last field of the third line (second data row).
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = csv.find('\n', pos) + 1;
  const std::size_t end = csv.find('\n', pos);
  const std::size_t comma = csv.rfind(',', end);
  std::string bad = csv.substr(0, comma) + csv.substr(end);
  try {
    Trace::parse_csv(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::string garbage = csv;
  garbage.replace(garbage.find('\n') + 1, 1, "x");
  CHECK_THROWS_AS(Trace::parse_csv(garbage), FormatError);
  CHECK_THROWS_AS(Trace::parse_csv("tick,time,bogus\n0,0,1\n"), FormatError);
}

TEST_CASE("rmse against a two-pass oracle") {
  std::mt19937 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(200, 4), b(200, 4);
  for (int i = 0; i < a.size(); ++i) {
    a.data()[i] = n(rng);
    b.data()[i] = n(rng);
  }
  double sq = 0.0;
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 4; ++j) sq += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(sq / 800.0)).epsilon(1e-14));
  CHECK(rmse(a, b) == rmse(b, a));
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, (a.array() + 0.25).matrix()) == doctest::Approx(0.25).epsilon(1e-14));

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(10, 3);
  Eigen::MatrixXd q = p;
  q.col(0).setConstant(3.0);
  q.col(1).setConstant(4.0);
  CHECK(rmse(p, q, Reduction::kNorm) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(rmse(p, q) == doctest::Approx(5.0 / std::sqrt(3.0)).epsilon(1e-15));

  CHECK_THROWS_AS(rmse(a, Eigen::MatrixXd(a.topRows(10))), ContractError);
  CHECK_THROWS_AS(rmse(Eigen::MatrixXd(a.topRows(1)), Eigen::MatrixXd(b.topRows(1))), ContractError);
  const std::vector<double> u{1, 2, 3}, v{1, 2, 5};
  CHECK(rmse(u, v) == doctest::Approx(std::sqrt(4.0 / 3.0)));
}

TEST_CASE("delay of a series against itself is zero") {
  const TimeSeries a = sampled(0, 2, 0);
  const DelayEstimate d = estimate_delay(a, a);
  CHECK(d.ms == 0.0);
  CHECK(d.peak == doctest::Approx(1.0));
  CHECK(d.step_ms == doctest::Approx(1.0));
}

TEST_CASE("a 5 ms shift is recovered within half a millisecond") {
  TimeSeries sine, late;
  for (int k = 0; k <= 1000; ++k) {
    sine.t.push_back(k * kDt);
    sine.v.push_back(std::sin(2 * std::numbers::pi * 10 * k * kDt));
    late.t.push_back(k * kDt);
    late.v.push_back(std::sin(2 * std::numbers::pi * 10 * (k * kDt - 0.005)));
  }
  CHECK(std::abs(estimate_delay(sine, late).ms - 5.0) <= 0.5);
  const DelayEstimate d = estimate_delay(sampled(0, 2, 0), sampled(0, 2, 0.005));
  CHECK(d.ms == doctest::Approx(5.0).epsilon(0.1));
  // b leading a gives a negative delay.
  CHECK(estimate_delay(sampled(0, 2, 0.005), sampled(0, 2, 0)).ms == doctest::Approx(-5.0).epsilon(0.1));
}

TEST_CASE("delays on a grid over plus and minus 20 ms") {
  for (double shift_ms = -20.0; shift_ms <= 20.0 + 1e-9; shift_ms += 2.5) {
    CAPTURE(shift_ms);
    const DelayEstimate d = estimate_delay(sampled(0, 2, 0), sampled(0, 2, shift_ms * 1e-3));
    CHECK(std::abs(d.ms - shift_ms) <= 0.5);
  }
}

TEST_CASE("sub-sample shifts on interleaved timestamps") {
  // b is sampled half a tick off a's grid and delayed 3.25 ms.
  TimeSeries a = sampled(0, 2, 0), b;
  for (double t = 0.0005; t <= 2; t += kDt) {
    b.t.push_back(t);
    b.v.push_back(signal(t - 0.00325));
  }
  CHECK(std::abs(estimate_delay(a, b).ms - 3.25) <= 0.5);
}

TEST_CASE("noisy 5 ms shifts land within 1 ms for at least 95 of 100 seeds") {
  int good = 0;
  for (unsigned seed = 0; seed < 100; ++seed) {
    std::mt19937 rng(seed);
    const DelayEstimate d = estimate_delay(sampled(0, 2, 0, 0.1, &rng), sampled(0, 2, 0.005, 0.1, &rng));
    if (std::abs(d.ms - 5.0) <= 1.0) ++good;
  }
  CHECK(good >= 95);
}

TEST_CASE("delay estimation rejects flat or short series") {
  TimeSeries flat;
  for (int i = 0; i < 500; ++i) {
    flat.t.push_back(i * kDt);
    flat.v.push_back(2.0);
  }
  CHECK_THROWS_AS(estimate_delay(flat, sampled(0, 0.499, 0)), ContractError);
  CHECK_THROWS_AS(estimate_delay(sampled(0, 0.05, 0), sampled(0, 0.05, 0)), ContractError);
  TimeSeries backwards = sampled(0, 1, 0);
  std::swap(backwards.t[3], backwards.t[4]);
  CHECK_THROWS_AS(estimate_delay(backwards, sampled(0, 1, 0)), ContractError);
}

TEST_CASE("command delay of a trace is ticks times dt plus the read phase") {
  CHECK(command_delay(command_trace(3000, 3, 0, 0.0005), 0).ms == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(command_delay(command_trace(3000, 3, 1, 0.0005), 0).ms == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(std::abs(command_delay(command_trace(3000, 3, 2, 0.0), 0).ms - 2.0) <= 1e-9);
  CHECK(std::abs(command_delay(command_trace(3000, 3, 4, 0.0003), 0).ms - 4.3) <= 0.5);
  for (int j = 0; j < 3; ++j)
    CHECK(command_delay(command_trace(3000, 3, 1, 0.0005), 0, {}, j).ms == doctest::Approx(1.5).epsilon(1e-9));
  CHECK_THROWS_AS(command_delay(command_trace(100, 3, 1, 0.0), 0, {}, 3), ContractError);
}

TEST_CASE("timing summary statistics") {
  const std::vector<double> constant(1000, 125.0);
  const TimingSummary c = timing_summary("c", constant);
  CHECK(c.count == 1000);
  CHECK(c.mean == doctest::Approx(125.0));
  CHECK(c.std == doctest::Approx(0.0));
  CHECK(c.p50 == 125.0);
  CHECK(c.p99 == 125.0);
  CHECK(c.max == 125.0);

  // 1..1000 shuffled, plus an outlier: nearest-rank percentiles.
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = i + 1;
  std::shuffle(v.begin(), v.end(), std::mt19937(2));
  v.push_back(50000.0);
  const TimingSummary m = timing_summary("m", v);
  CHECK(m.count == 1001);
  CHECK(m.p50 == 501.0);
  CHECK(m.p99 == 991.0);
  CHECK(m.max == 50000.0);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  CHECK(m.mean == doctest::Approx(mean));
  CHECK(m.std == doctest::Approx(std::sqrt(var / v.size())));
  std::vector<double> mix(2000, 10.0);
  std::fill(mix.begin() + 1000, mix.end(), 20.0);
  CHECK(timing_summary("mix", mix).mean == doctest::Approx(15.0));
  CHECK(timing_summary("mix", mix).std == doctest::Approx(5.0));
  CHECK(timing_table({c, m}).find("50000.00") != std::string::npos);
  CHECK(timing_summary("empty", std::vector<double>{}).count == 0);
}

TEST_CASE("control error reflects a one-tick delay on a step") {
  Trace t(1, 2);
  for (int k = 0; k < 20; ++k) {
    double* r = t.append_row();
    r[0] = k;
    r[1] = k * kDt;
    const double cmd = k >= 10 ? 4.0 : 1.0;
    const double prev = k - 1 >= 10 ? 4.0 : 1.0;
    t.get(k, 0, Channel::kTauCmd).setConstant(cmd);
    t.get(k, 0, Channel::kTauMeas).setConstant(k == 0 ? cmd : prev);
  }
  const Eigen::MatrixXd e = control_error(t, 0);
  for (int k = 0; k < 20; ++k) {
    CAPTURE(k);
    CHECK(e(k, 0) == (k == 10 ? 3.0 : 0.0));
    CHECK(e(k, 1) == e(k, 0));
  }
  CHECK_THROWS_AS(control_error(t, 1), FormatError);
}

TEST_CASE("control error of measurement noise alone has rmse near the noise level") {
  const double sigma = 0.05;
  const Trace t = command_trace(20000, 7, 0, 0.0, sigma, 4);
  const Eigen::MatrixXd e = control_error(t, 0);
  const double r = rmse(e, Eigen::MatrixXd::Zero(e.rows(), e.cols()));
  CHECK(r == doctest::Approx(sigma).epsilon(0.1));
}

TEST_CASE("fidelity does not depend on row order") {
  Trace sim = random_trace(1, 3, 400, 8);
  const Trace ref = random_trace(1, 3, 400, 9);
  for (std::size_t i = 0; i < sim.rows(); ++i) sim.get(i, 0, Channel::kFlags)[0] = 0;
  Trace ref_clean = ref;
  for (std::size_t i = 0; i < ref_clean.rows(); ++i) ref_clean.get(i, 0, Channel::kFlags)[0] = 0;
  const FidelityReport a = fidelity(sim, ref_clean, 0);

  Trace shuffled(1, 3);
  std::vector<std::size_t> order(sim.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), std::mt19937(1));
  for (std::size_t i : order) std::copy(sim.row(i), sim.row(i) + sim.width(), shuffled.append_row());
  const FidelityReport b = fidelity(shuffled, ref_clean, 0);
  CHECK(a.q == b.q);
  CHECK(a.qd == b.qd);
  CHECK(a.tau == b.tau);
  CHECK(a.x == b.x);
  CHECK(a.F == b.F);
  CHECK(a.c_err == b.c_err);
  CHECK(a.samples == 400);
  CHECK(a.valid);

  const FidelityReport self = fidelity(ref_clean, ref_clean, 0);
  CHECK(self.q == 0.0);
  CHECK(self.F == 0.0);
}

TEST_CASE("fidelity aligns on common ticks and flags plant faults") {
  const Trace base = command_trace(1000, 2, 1, 0.0005);
  Trace late(1, 2);
  for (std::size_t i = 100; i < base.rows(); ++i)
    std::copy(base.row(i), base.row(i) + base.width(), late.append_row());
  const FidelityReport r = fidelity(late, base, 0);
  CHECK(r.samples == 900);
  CHECK(r.tau == 0.0);
  CHECK(r.delay_ms == doctest::Approx(1.5).epsilon(1e-6));

  Trace faulty = base;
  faulty.get(500, 0, Channel::kFlags)[0] = kFlagPlantFault;
  CHECK_FALSE(fidelity(base, faulty, 0).valid);

  Trace disjoint(1, 2);
  std::copy(base.row(0), base.row(0) + base.width(), disjoint.append_row());
  CHECK_THROWS_AS(fidelity(disjoint, base, 0), ContractError);

  std::vector<FidelityReport> trials(2, r);
  trials[1].q = 3.0;
  trials[1].valid = false;
  const FidelityReport m = mean_report(trials);
  CHECK(m.q == doctest::Approx(0.5 * (r.q + 3.0)));
  CHECK_FALSE(m.valid);
}

TEST_CASE("parallel kernels agree with their serial references") {
  std::mt19937 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd Y(3000, 40);
  Eigen::VectorXd y(3000);
  for (int i = 0; i < Y.size(); ++i) Y.data()[i] = n(rng);
  for (int i = 0; i < y.size(); ++i) y[i] = n(rng);
  Eigen::MatrixXd As, Ap;
  Eigen::VectorXd bs, bp;
  normal_equations(Y, y, Exec::kSerial, &As, &bs);
  normal_equations(Y, y, Exec::kParallel, &Ap, &bp);
  CHECK((As - Ap).cwiseAbs().maxCoeff() <= 1e-10 * As.cwiseAbs().maxCoeff());
  CHECK((bs - bp).cwiseAbs().maxCoeff() <= 1e-10 * bs.cwiseAbs().maxCoeff());
  Eigen::MatrixXd Ap2;
  Eigen::VectorXd bp2;
  normal_equations(Y, y, Exec::kParallel, &Ap2, &bp2);
  CHECK(Ap2 == Ap);  // deterministic

  std::vector<double> a(2000), b(2000);
  for (int i = 0; i < 2000; ++i) {
    a[i] = signal(i * kDt);
    b[i] = signal(i * kDt - 0.004);
  }
  const auto cs = correlation_scan(a, b, 50, Exec::kSerial);
  const auto cp = correlation_scan(a, b, 50, Exec::kParallel);
  CHECK(cs == cp);
  CHECK(std::max_element(cs.begin(), cs.end()) - cs.begin() == 54);

  const RobotModel& m = default_model();
  std::vector<VecN> qs;
  for (int i = 0; i < 300; ++i) qs.push_back(random_q(m, rng));
  const MassMatrixCheck ms = batch_mass_matrix_check(m, qs, Exec::kSerial);
  const MassMatrixCheck mp = batch_mass_matrix_check(m, qs, Exec::kParallel);
  CHECK(ms.max_asymmetry == mp.max_asymmetry);
  CHECK(ms.min_eigenvalue == mp.min_eigenvalue);
  CHECK(ms.max_asymmetry < 1e-12);
  CHECK(ms.min_eigenvalue > 0.0);
  CHECK(parallel_threads() >= 1);
}
