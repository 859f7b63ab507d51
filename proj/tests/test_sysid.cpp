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

#include <cmath>
#include <numbers>
#include <random>

#include "mmctl/dynamics.hpp"
#include "mmctl/plant.hpp"
#include "mmctl/sysid.hpp"
#include "test_util.hpp"

using namespace mmctl;
using namespace mmctl::testing;

namespace {

// Random physical link: principal moments drawn so the triangle inequality
// holds, rotated by a random orientation.
LinkInertia random_link(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LinkInertia l;
  l.mass = 0.2 + 3.0 * u(rng);
  l.com = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 0.2;
  const double a = 0.005 + 0.05 * u(rng), b = 0.005 + 0.05 * u(rng);
  const double c = std::abs(a - b) + (a + b - std::abs(a - b)) * (0.1 + 0.8 * u(rng));
  const Mat3 R = Quat(Eigen::Vector4d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized())
                     .toRotationMatrix();
  l.inertia = R * Vec3(a, b, c).asDiagonal() * R.transpose();
  return l;
}

RobotModel randomized(const RobotModel& m, std::mt19937& rng) {
  RobotModel out = m;
  for (auto& l : out.links) l = random_link(rng);
  return out;
}

std::vector<RegressorSample> synthetic(const RobotModel& truth, int count, std::mt19937& rng, double noise = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<RegressorSample> out;
  for (int i = 0; i < count; ++i) {
    RegressorSample s;
    s.q = random_q(truth, rng);
    s.qd = random_vec(truth.dof(), rng, 1.5);
    s.qdd = random_vec(truth.dof(), rng, 4.0);
    s.tau = inverse_dynamics(truth, s.q, s.qd, s.qdd);
    for (int j = 0; j < truth.dof(); ++j) s.tau[j] += noise * n(rng);
    out.push_back(s);
  }
  return out;
}

// Torque RMSE of a parameter vector on samples (armature from the model).
double torque_rmse(const RobotModel& model, const Eigen::VectorXd& pi, const std::vector<RegressorSample>& s) {
  double sq = 0.0;
  for (const auto& x : s) {
    const VecN pred = regressor(model, x.q, x.qd, x.qdd) * pi + model.armature().cwiseProduct(x.qdd);
    sq += (pred - x.tau).squaredNorm();
  }
  return std::sqrt(sq / (s.size() * model.dof()));
}

bool same_links(const RobotModel& a, const RobotModel& b) {
  for (int i = 0; i < a.dof(); ++i) {
    if (a.links[i].mass != b.links[i].mass || a.links[i].com != b.links[i].com ||
        a.links[i].inertia != b.links[i].inertia)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("regressor times parameters equals RNEA on random physical models") {
  std::mt19937 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const RobotModel m = trial % 10 == 0 ? default_model() : randomized(default_model(), rng);
    const VecN q = random_q(m, rng), qd = random_vec(m.dof(), rng, 2.0), qdd = random_vec(m.dof(), rng, 5.0);
    const VecN expect = rnea(m, q, qd, qdd);
    const VecN got = regressor(m, q, qd, qdd) * extract_parameters(m);
    worst = std::max(worst, (expect - got).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("regressor is linear in the parameters") {
  std::mt19937 rng(2);
  const RobotModel& m = default_model();
  const Eigen::VectorXd p1 = extract_parameters(randomized(m, rng));
  const Eigen::VectorXd p2 = extract_parameters(randomized(m, rng));
  const Eigen::MatrixXd Y = regressor(m, random_q(m, rng), random_vec(7, rng), random_vec(7, rng));
  CHECK((Y * (p1 + p2) - Y * p1 - Y * p2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("static regressor reproduces gravity torque") {
  std::mt19937 rng(3);
  const RobotModel& m = default_model();
  const Eigen::VectorXd pi = extract_parameters(m);
  const VecN zero = VecN::Zero(7);
  for (int i = 0; i < 50; ++i) {
    const VecN q = random_q(m, rng);
    CHECK((regressor(m, q, zero, zero) * pi - gravity_torque(m, q)).cwiseAbs().maxCoeff() < 1e-10);
  }
  // Planar chain in the horizontal plane: no gravity torque about vertical axes.
  const RobotModel flat = planar_chain(3);
  CHECK((regressor(flat, VecN::Constant(3, 0.3), VecN::Zero(3), VecN::Zero(3)) * extract_parameters(flat))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("extracted parameters re-apply bit-exactly") {
  const RobotModel& m = default_model();
  const RobotModel back = apply_identified(m, extract_parameters(m));
  CHECK(same_links(back, m));
  CHECK(back.version == m.version);
  CHECK(back.joints.size() == m.joints.size());
  CHECK(dump_model(back) == dump_model(m));

  // A changed link updates only that link.
  Eigen::VectorXd pi = extract_parameters(m);
  pi.segment<kLinkParams>(6 * kLinkParams) *= 1.2;
  const RobotModel heavier = apply_identified(m, pi);
  CHECK(heavier.links[6].mass == doctest::Approx(1.2 * m.links[6].mass));
  CHECK((heavier.links[6].com - m.links[6].com).norm() < 1e-14);
  CHECK((heavier.links[6].inertia - 1.2 * m.links[6].inertia).norm() < 1e-12);
  CHECK(heavier.links[5].mass == m.links[5].mass);
  CHECK(heavier.version == m.version + 1);
  CHECK((extract_parameters(heavier) - pi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("apply rejects non-physical parameters") {
  const RobotModel& m = default_model();
  Eigen::VectorXd pi = extract_parameters(m);
  pi[2 * kLinkParams] = -1.0;
  CHECK_THROWS_AS(apply_identified(m, pi), ContractError);
  pi = extract_parameters(m);
  pi[3 * kLinkParams + 4] = -0.5;  // Ixx about the origin
  CHECK_THROWS_AS(apply_identified(m, pi), ContractError);
  CHECK_THROWS_AS(apply_identified(m, Eigen::VectorXd::Zero(5)), ContractError);
  pi = extract_parameters(m);
  pi[0] = std::nan("");
  CHECK_THROWS_AS(apply_identified(m, pi), ContractError);
}

TEST_CASE("projection restores physical consistency") {
  const RobotModel& m = default_model();
  Eigen::VectorXd pi = extract_parameters(m);
  CHECK(parameters_physical(pi));
  pi[0] = -0.3;
  pi[kLinkParams + 4] = -2.0;
  // Triangle violation on link 3: one principal moment far above the others.
  pi[2 * kLinkParams + 9] += 5.0;
  CHECK_FALSE(parameters_physical(pi));
  const Eigen::VectorXd fixed = project_physical(pi);
  CHECK(parameters_physical(fixed));
  CHECK(fixed[0] >= 1e-3);
  CHECK_NOTHROW(apply_identified(m, fixed));
  // Untouched links stay close.
  CHECK((fixed.segment<kLinkParams>(5 * kLinkParams) - pi.segment<kLinkParams>(5 * kLinkParams)).norm() < 1e-9);
}

TEST_CASE("noiseless data from a perturbed arm is fit to round-off on held-out samples") {
  std::mt19937 rng(4);
  const RobotModel& nominal = default_model();
  Perturbation p;
  p.mass = {1, 1, 1, 1, 1, 1, 1.2};
  const RobotModel truth = perturb(nominal, p);
  const auto train = synthetic(truth, 1000, rng);
  const auto held = synthetic(truth, 500, rng);
  const Eigen::VectorXd prior = extract_parameters(nominal);
  CHECK(torque_rmse(nominal, prior, held) > 1e-3);
  const IdentifyResult r = identify(nominal, train, prior);
  CHECK(r.rank > 0);
  CHECK(r.rank < 70);  // some combinations never show up in joint torques
  CHECK(torque_rmse(nominal, r.pi, held) < 1e-6);
  CHECK(r.fit_rmse < 1e-6);
  const RobotModel identified = apply_identified(nominal, r.pi);
  for (const auto& s : held) CHECK((inverse_dynamics(identified, s.q, s.qd, s.qdd) - s.tau).norm() < 1e-5);
  CHECK(parameter_report(r, nominal).find("rank") != std::string::npos);
}

TEST_CASE("infinite regularization returns the prior") {
  std::mt19937 rng(5);
  const RobotModel& nominal = default_model();
  Perturbation p;
  p.mass = {1, 1, 1, 1, 1, 1, 1.2};
  const auto minimal = synthetic(perturb(nominal, p), 10 * 7 * 5, rng);
  const Eigen::VectorXd prior = extract_parameters(nominal);
  IdentifyOptions opt;
  opt.lambda = std::numeric_limits<double>::infinity();
  const IdentifyResult r = identify(nominal, minimal, prior, opt);
  CHECK(r.pi == prior);
  opt.lambda = 1e30;
  CHECK((identify(nominal, minimal, prior, opt).pi - prior).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(identify(nominal, std::span(minimal).first(5), prior), ContractError);
}

TEST_CASE("torque noise leaves the held-out error within twice the noise floor") {
  const double sigma = 0.05;
  const RobotModel& nominal = default_model();
  Perturbation p;
  p.mass = {1, 1, 1, 1.15, 1.15, 1.15, 1.15};
  const RobotModel truth = perturb(nominal, p);
  int good = 0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    std::mt19937 rng(100 + t);
    const auto train = synthetic(truth, 2000, rng, sigma);
    const auto held = synthetic(truth, 500, rng, sigma);
    const IdentifyResult r = identify(nominal, train, extract_parameters(nominal));
    const double e = torque_rmse(nominal, r.pi, held);
    if (e <= 2.0 * sigma) ++good;
  }
  CHECK(good == trials);
}

TEST_CASE("serial and parallel identification agree") {
  std::mt19937 rng(6);
  const RobotModel& nominal = default_model();
  const auto train = synthetic(nominal, 1500, rng, 0.05);
  IdentifyOptions s, p;
  s.exec = Exec::kSerial;
  p.exec = Exec::kParallel;
  const Eigen::VectorXd prior = extract_parameters(nominal);
  const IdentifyResult a = identify(nominal, train, prior, s);
  const IdentifyResult b = identify(nominal, train, prior, p);
  CHECK(a.rank == b.rank);
  CHECK(torque_rmse(nominal, a.pi, train) == doctest::Approx(torque_rmse(nominal, b.pi, train)).epsilon(1e-9));
  CHECK(identify(nominal, train, prior, p).pi == b.pi);
}

TEST_CASE("zero-phase Butterworth filter") {
  const Biquad f = butterworth_lowpass(30.0, 1000.0);
  CHECK(f.b0 + f.b1 + f.b2 == doctest::Approx(1.0 + f.a1 + f.a2));  // unit DC gain
  const std::vector<double> c(300, 3.5);
  for (double v : filtfilt(f, c)) CHECK(v == doctest::Approx(3.5).epsilon(1e-12));

  auto amplitude_and_lag = [&](double hz) {
    std::vector<double> x(4000);
    for (int k = 0; k < 4000; ++k) x[k] = std::sin(2 * std::numbers::pi * hz * k * 1e-3);
    const auto y = filtfilt(f, x);
    double num = 0, den = 0, cross = 0;
    for (int k = 1000; k < 3000; ++k) {
      num += y[k] * y[k];
      den += x[k] * x[k];
      cross += x[k] * y[k];
    }
    return std::pair{std::sqrt(num / den), cross / std::sqrt(num * den)};
  };
  const auto [low, low_corr] = amplitude_and_lag(2.0);
  CHECK(low == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(low_corr > 1.0 - 1e-9);  // no phase shift
  const auto [cut, cut_corr] = amplitude_and_lag(30.0);
  CHECK(cut == doctest::Approx(0.5).epsilon(0.01));  // -3 dB each pass
  CHECK(cut_corr > 1.0 - 1e-9);
  CHECK(amplitude_and_lag(200.0).first < 0.05);
  CHECK_THROWS_AS(butterworth_lowpass(600.0, 1000.0), ContractError);
}

TEST_CASE("excitation stays in range, starts at rest and clears the plane") {
  const RobotModel& m = default_model();
  Transform base;
  base.translation = Vec3(0, 0.4, 0);
  ExcitationOptions opt;
  opt.seed = 3;
  const Excitation e = make_excitation(m, base, m.home, opt);
  CHECK((e.q(0.0) - m.home).norm() < 1e-12);
  CHECK(e.qd(0.0).norm() < 1e-12);
  const VecN lo = m.lower_limits(), hi = m.upper_limits();
  for (double t = 0; t <= 20.0; t += 0.01) {
    const VecN q = e.q(t), qd = e.qd(t);
    for (int j = 0; j < 7; ++j) {
      CHECK(std::abs(q[j] - m.home[j]) <= 0.5 * std::min(m.home[j] - lo[j], hi[j] - m.home[j]) + 1e-12);
      CHECK(std::abs(qd[j]) <= 0.5 * m.joints[j].velocity_limit + 1e-9);
    }
    // Velocity is the derivative of position.
    if (std::fmod(t, 1.0) < 0.01) {
      const VecN fd = (e.q(t + 1e-6) - e.q(t - 1e-6)) / 2e-6;
      CHECK((fd - qd).norm() < 1e-6);
    }
  }
  // A plane just under the home end-effector forces smaller amplitudes.
  const double ee_z = base.apply(forward_kinematics(m, m.home).position).z();
  ExcitationOptions tight = opt;
  tight.plane_z = ee_z - 0.12;
  const Excitation small = make_excitation(m, base, m.home, tight);
  CHECK(small.amplitude.maxCoeff() < e.amplitude.maxCoeff());
  CHECK(lowest_point(m, base, small, 20.0) >= tight.plane_z + tight.clearance);
  tight.plane_z = ee_z + 1.0;
  CHECK_THROWS_AS(make_excitation(m, base, m.home, tight), ContractError);
}

TEST_CASE("identification from a simulated excitation run") {
  const RobotModel& nominal = default_model();
  Perturbation p;
  p.mass = {1, 1, 1, 1.15, 1.15, 1.15, 1.15};
  const RobotModel truth = perturb(nominal, p);
  WorldConfig wc;
  RobotPlantConfig rc;
  rc.physics = truth;
  rc.estimator = nominal;
  rc.q0 = nominal.home;
  rc.qd0 = VecN::Zero(7);
  rc.noise = NoiseConfig::defaults();
  rc.command_delay = 1;
  wc.robots.push_back(rc);
  World w(wc);
  ExcitationOptions eo;
  const Excitation e = make_excitation(nominal, Transform{}, nominal.home, eo);

  Trace trace(1, 7);
  const int ticks = 20000;
  trace.reserve(ticks);
  std::vector<VecN> cmd(1);
  const VecN kp = VecN::Constant(7, 300.0), kd = VecN::Constant(7, 30.0);
  for (int k = 0; k < ticks; ++k) {
    const PlantOutput& o = w.output(0);
    const double t = k * 1e-3;
    cmd[0] = gravity_torque(nominal, o.state.q) + kp.cwiseProduct(e.q(t) - o.state.q) +
             kd.cwiseProduct(e.qd(t) - o.state.qd);
    double* row = trace.append_row();
    row[0] = k;
    row[1] = t;
    trace.get(k, 0, Channel::kQ) = o.state.q;
    trace.get(k, 0, Channel::kQd) = o.state.qd;
    w.step(cmd);
    trace.get(k, 0, Channel::kTauMeas) = w.output(0).tau_meas;
  }
  REQUIRE_FALSE(w.faulted());
  const auto samples = samples_from_trace(trace, 0, 1e-3);
  CHECK(samples.size() > 3000);
  const Eigen::VectorXd prior = extract_parameters(nominal);
  const IdentifyResult r = identify(nominal, samples, prior);
  const RobotModel id = apply_identified(nominal, r.pi);

  // Held-out check on true dynamics at random states.
  std::mt19937 rng(9);
  double before = 0, after = 0;
  for (int i = 0; i < 300; ++i) {
    const VecN q = e.q(std::uniform_real_distribution<double>(2, 20)(rng));
    const VecN g_true = gravity_torque(truth, q);
    before += (gravity_torque(nominal, q) - g_true).squaredNorm();
    after += (gravity_torque(id, q) - g_true).squaredNorm();
  }
  MESSAGE("gravity error before " << std::sqrt(before / 2100) << " after " << std::sqrt(after / 2100));
  CHECK(after < 0.25 * before);
}
