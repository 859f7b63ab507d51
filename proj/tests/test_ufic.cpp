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
#include <random>

#include "mmctl/ufic.hpp"

using namespace mmctl;

namespace {

constexpr double kDt = 1e-3;

Vec6 push(double fz) {
  Vec6 f = Vec6::Zero();
  f[2] = fz;
  return f;
}

CartesianState at(const Vec3& p, const Vec6& twist = Vec6::Zero()) {
  CartesianState x;
  x.position = p;
  x.twist = twist;
  return x;
}

UficState latched(const Vec3& x_c, double E) {
  UficState s;
  s.x_c = x_c;
  s.contact_latched = true;
  s.in_contact = true;
  s.E_f = E;
  s.E_i = E;
  return s;
}

}  // namespace

TEST_CASE("contact kernel is one at the contact point") {
  UficGains g;
  const Vec3 p(0.3, 0.0, 0.2);
  for (double E : {0.0, 5.0, 100.0}) {
    const auto out = ufic_wrench(latched(p, E), g, push(-9.81), push(-5.0), at(p), kDt);
    CHECK(out.state.gamma_f == 1.0);
    CHECK(out.wrench == out.raw);
    CHECK(out.raw[2] != 0.0);
  }
}

TEST_CASE("contact kernel at d_max is 1/e") {
  UficGains g;
  const Vec3 p(0.3, 0.0, 0.2);
  const auto out = ufic_wrench(latched(p, 0.0), g, push(-9.81), push(-5.0),
                               at(p + Vec3(0, g.d_max, 0)), kDt);
  CHECK(out.state.gamma_f == doctest::Approx(0.36787944117144233).epsilon(1e-15));
}

TEST_CASE("empty tank and no contact gate the force channel to exactly zero") {
  UficGains g;
  UficState s;
  s.E_f = g.E_min;
  const auto out = ufic_wrench(s, g, push(-9.81), Vec6::Zero(), at(Vec3(0.3, 0, 0.3)), kDt);
  CHECK(out.state.gamma_f == 0.0);
  CHECK(out.state.alpha_f == 0.0);
  CHECK(out.raw.norm() > 0.0);
  CHECK(out.wrench.isZero(0.0));
}

TEST_CASE("initial tank energy") {
  // 0.5 * 200 * 9.81^2 = 9623.6 J, above the 100 J cap.
  CHECK(initial_tank_energy(200.0, push(9.81), 0.0, 100.0) == 100.0);
  CHECK(initial_tank_energy(200.0, push(0.5), 0.0, 100.0) == doctest::Approx(25.0));
  CHECK(initial_tank_energy(200.0, Vec6::Zero(), 0.0, 100.0) == 0.0);
  UficGains g;
  g.F_d = push(-9.81);
  const UficState s = ufic_init(g);
  CHECK(s.E_f == 100.0);
  CHECK(s.E_i == 100.0);
  CHECK(s.alpha_f == 1.0);
}

TEST_CASE("tank energies and shaping signals stay bounded") {
  std::mt19937 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    UficGains g;
    g.F_d = push(-9.81);
    g.E_max = 1.0 + 50.0 * std::abs(n(rng));
    UficState s = ufic_init(g);
    for (int k = 0; k < 5000; ++k) {
      Vec6 F = Vec6::Zero();
      for (int i = 0; i < 6; ++i) F[i] = 15.0 * n(rng);
      Vec6 twist = Vec6::Zero();
      for (int i = 0; i < 6; ++i) twist[i] = 0.5 * n(rng);
      const Vec3 p(0.3 + 0.05 * n(rng), 0.05 * n(rng), 0.2 + 0.05 * n(rng));
      const auto out = ufic_wrench(s, g, push(-30.0 * std::abs(n(rng))), F, at(p, twist), kDt);
      s = out.state;
      Vec6 shaping = Vec6::Zero();
      for (int i = 0; i < 6; ++i) shaping[i] = 50.0 * n(rng);
      drain_impedance_tank(s, g, shaping, twist, kDt);
      REQUIRE(s.E_f >= g.E_min);
      REQUIRE(s.E_f <= g.E_max);
      REQUIRE(s.E_i >= g.E_min);
      REQUIRE(s.E_i <= g.E_max);
      REQUIRE(s.gamma_f >= 0.0);
      REQUIRE(s.gamma_f <= 1.0);
      REQUIRE(s.alpha_f >= 0.0);
      REQUIRE(s.alpha_f <= 1.0);
      REQUIRE(s.alpha_i >= 0.0);
      REQUIRE(s.alpha_i <= 1.0);
    }
  }
}

TEST_CASE("gating is monotone in tank fill when out of contact") {
  UficGains g;
  double prev = -1.0;
  for (int k = 0; k <= 200; ++k) {
    UficState s;
    s.E_f = g.E_min + (g.E_max - g.E_min) * k / 200.0;
    const auto out = ufic_wrench(s, g, push(-9.81), Vec6::Zero(), at(Vec3(0, 0, 1)), kDt);
    CHECK(out.state.gamma_f == 0.0);
    CHECK(out.wrench.norm() >= prev);
    prev = out.wrench.norm();
  }
  CHECK(prev > 0.0);
}

TEST_CASE("output that would overdraw the tank is dropped") {
  UficGains g;
  UficState s;
  s.E_f = 5.0;
  Vec6 twist = Vec6::Zero();
  twist[2] = -1000.0;  // moving along the push fast enough to empty the tank in one tick
  const auto out = ufic_wrench(s, g, push(-30.0), Vec6::Zero(), at(Vec3(0, 0, 1), twist), kDt);
  CHECK(out.state.underflow);
  CHECK(out.state.alpha_f == 0.0);
  CHECK(out.wrench.isZero(0.0));
  CHECK(out.state.E_f == 5.0);
}

TEST_CASE("force PID acts only on the selected axes with a capped integral") {
  UficGains g;
  UficState s = ufic_init(g);
  s.E_f = g.E_max;
  Vec6 F_meas = Vec6::Zero();
  F_meas[0] = 4.0;  // x is not force controlled
  for (int k = 0; k < 20000; ++k) {
    s = ufic_wrench(s, g, push(-20.0), F_meas, at(Vec3(0, 0, 1)), kDt).state;
  }
  const auto out = ufic_wrench(s, g, push(-20.0), F_meas, at(Vec3(0, 0, 1)), kDt);
  CHECK(out.raw[0] == 0.0);
  CHECK(std::abs(g.K_i[2] * out.state.integral[2]) <= g.integral_limit + 1e-12);
  // Feedforward -20 N, proportional -4 N, saturated integral -50 N.
  CHECK(out.raw[2] == doctest::Approx(-20.0 - 0.2 * 20.0 - 50.0));
}

TEST_CASE("contact reference latches on force onset and re-latches after loss") {
  UficGains g;
  UficState s = ufic_init(g);
  s = ufic_wrench(s, g, push(-5), push(-0.5), at(Vec3(0, 0, 0.30)), kDt).state;
  CHECK_FALSE(s.contact_latched);
  s = ufic_wrench(s, g, push(-5), push(-2.0), at(Vec3(0, 0, 0.29)), kDt).state;
  CHECK(s.contact_latched);
  CHECK(s.x_c.z() == 0.29);
  s = ufic_wrench(s, g, push(-5), push(-3.0), at(Vec3(0.1, 0, 0.28)), kDt).state;
  CHECK(s.x_c.z() == 0.29);
  s = ufic_wrench(s, g, push(-5), push(0.0), at(Vec3(0.1, 0, 0.35)), kDt).state;
  CHECK_FALSE(s.in_contact);
  s = ufic_wrench(s, g, push(-5), push(-4.0), at(Vec3(0.2, 0, 0.27)), kDt).state;
  CHECK(s.x_c == Vec3(0.2, 0, 0.27));
}

TEST_CASE("gain contracts") {
  UficGains g;
  g.E_min = 10.0;
  g.E_max = 5.0;
  CHECK_THROWS_AS(g.validate(), ContractError);
  g = UficGains{};
  g.d_max = 0.0;
  CHECK_THROWS_AS(g.validate(), ContractError);
}
