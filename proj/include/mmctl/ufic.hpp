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

// Unified force-impedance shaping: a force PID whose output is blended in
// by a contact-distance kernel and an energy tank, plus a second tank that
// gates the extra impedance stiffness.
//
//   F_f' = (gamma_f + alpha_f (1 - gamma_f)) F_f
//   gamma_f = exp(-|x - x_c|^2 / d_max^2)
//   alpha   = clamp((E - E_min) / (fade (E_max - E_min)), 0, 1)
//   E      -= dt max(0, P_out), clamped to [E_min, E_max]
#pragma once

#include <array>

#include "mmctl/types.hpp"

namespace mmctl {

struct UficGains {
  Vec6 K_p = Vec6::Constant(0.2);
  Vec6 K_d = Vec6::Zero();
  Vec6 K_i = Vec6::Constant(5.0);
  Vec6 F_d = Vec6::Zero();   // nominal desired wrench; sizes the initial tanks
  Vec6 F_ff = Vec6::Zero();  // friction feedforward, unused by default
  std::array<bool, 6> force_axes{false, false, true, false, false, false};
  double d_max = 0.05;
  double E_min = 0.0;
  double E_max = 100.0;
  double integral_limit = 50.0;     // |K_i * integral| cap per axis, N
  double contact_threshold = 1.0;   // N, latches x_c
  double tank_fade = 0.1;           // fraction of the tank over which alpha fades
  // Gain magnitude used to size the initial tank energy; defaults to the
  // literal force stiffness of the reference parameter set.
  double tank_gain = 200.0;

  void validate() const;
};

struct UficState {
  Vec6 integral = Vec6::Zero();
  Vec6 prev_error = Vec6::Zero();
  bool has_prev = false;
  double E_f = 0.0;
  double E_i = 0.0;
  double gamma_f = 0.0;
  double alpha_f = 0.0;
  double alpha_i = 0.0;
  Vec3 x_c = Vec3::Zero();
  bool contact_latched = false;
  bool in_contact = false;
  bool underflow = false;  // last tick disabled a channel to keep E >= E_min
};

// E_0 = 1/2 |K| |F_d|^2 clamped into [E_min, E_max].
double initial_tank_energy(double gain_norm, const Vec6& F_d, double E_min, double E_max);

UficState ufic_init(const UficGains& gains);

double tank_alpha(double E, const UficGains& gains);

struct UficOutput {
  Vec6 wrench = Vec6::Zero();  // shaped F_f'
  Vec6 raw = Vec6::Zero();     // PID output F_f
  UficState state;
};

// One force-channel tick. F_meas is the wrench the end-effector applies to
// the environment; F_d uses the same convention. `desired` overrides the
// nominal F_d for time-varying targets.
UficOutput ufic_wrench(const UficState& state, const UficGains& gains, const Vec6& desired,
                       const Vec6& F_meas, const CartesianState& x, double dt);

// Drains the impedance tank by the power of the extra shaping wrench and
// refreshes alpha_i. Returns the (possibly zeroed) shaping wrench.
Vec6 drain_impedance_tank(UficState& state, const UficGains& gains, const Vec6& shaping_wrench,
                          const Vec6& twist, double dt);

}  // namespace mmctl
