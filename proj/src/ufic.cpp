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

#include "mmctl/ufic.hpp"

#include <algorithm>
#include <cmath>

namespace mmctl {

void UficGains::validate() const {
  if (!(E_min <= E_max)) throw ContractError("ufic: E_min must not exceed E_max");
  if (!(d_max > 0.0)) throw ContractError("ufic: d_max must be positive");
  if (!(tank_fade > 0.0 && tank_fade <= 1.0)) throw ContractError("ufic: tank_fade in (0, 1]");
  if ((K_p.array() < 0).any() || (K_d.array() < 0).any() || (K_i.array() < 0).any()) {
    throw ContractError("ufic: PID gains must be non-negative");
  }
}

double initial_tank_energy(double gain_norm, const Vec6& F_d, double E_min, double E_max) {
  const double e = 0.5 * std::abs(gain_norm) * F_d.squaredNorm();
  return std::clamp(e, E_min, E_max);
}

double tank_alpha(double E, const UficGains& g) {
  const double span = g.tank_fade * (g.E_max - g.E_min);
  if (span <= 0.0) return E > g.E_min ? 1.0 : 0.0;
  return std::clamp((E - g.E_min) / span, 0.0, 1.0);
}

UficState ufic_init(const UficGains& gains) {
  gains.validate();
  UficState s;
  s.E_f = initial_tank_energy(gains.tank_gain, gains.F_d, gains.E_min, gains.E_max);
  s.E_i = s.E_f;
  s.alpha_f = tank_alpha(s.E_f, gains);
  s.alpha_i = tank_alpha(s.E_i, gains);
  return s;
}

UficOutput ufic_wrench(const UficState& state, const UficGains& g, const Vec6& desired,
                       const Vec6& F_meas, const CartesianState& x, double dt) {
  UficOutput out;
  UficState& s = out.state;
  s = state;
  s.underflow = false;

  // Contact latch on the force-controlled linear axes.
  double normal_sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (g.force_axes[i]) normal_sq += F_meas[i] * F_meas[i];
  }
  const bool contact = std::sqrt(normal_sq) > g.contact_threshold;
  if (contact && !s.in_contact) {
    s.x_c = x.position;
    s.contact_latched = true;
  }
  s.in_contact = contact;

  s.gamma_f = s.contact_latched
                  ? std::exp(-(x.position - s.x_c).squaredNorm() / (g.d_max * g.d_max))
                  : 0.0;

  // Feedforward plus PID on the selected axes.
  Vec6 error = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    if (g.force_axes[i]) error[i] = desired[i] - F_meas[i];
  }
  const Vec6 derr = s.has_prev ? Vec6((error - s.prev_error) / dt) : Vec6::Zero();
  s.prev_error = error;
  s.has_prev = true;
  for (int i = 0; i < 6; ++i) {
    if (!g.force_axes[i]) continue;
    s.integral[i] += error[i] * dt;
    if (g.K_i[i] > 0.0) {
      const double cap = g.integral_limit / g.K_i[i];
      s.integral[i] = std::clamp(s.integral[i], -cap, cap);
    }
    out.raw[i] = g.F_ff[i] + desired[i] + g.K_p[i] * error[i] + g.K_d[i] * derr[i] +
                 g.K_i[i] * s.integral[i];
  }

  // Tank gating; an output that would overdraw the tank is dropped to the
  // contact-kernel part for this tick.
  s.alpha_f = tank_alpha(s.E_f, g);
  out.wrench = (s.gamma_f + s.alpha_f * (1.0 - s.gamma_f)) * out.raw;
  double power = std::max(0.0, out.wrench.dot(x.twist));
  if (s.E_f - dt * power < g.E_min && s.alpha_f > 0.0) {
    s.alpha_f = 0.0;
    s.underflow = true;
    out.wrench = s.gamma_f * out.raw;
    power = std::max(0.0, out.wrench.dot(x.twist));
  }
  s.E_f = std::clamp(s.E_f - dt * power, g.E_min, g.E_max);
  s.alpha_i = tank_alpha(s.E_i, g);
  return out;
}

Vec6 drain_impedance_tank(UficState& s, const UficGains& g, const Vec6& shaping_wrench,
                          const Vec6& twist, double dt) {
  Vec6 w = shaping_wrench;
  const double power = std::max(0.0, w.dot(twist));
  if (s.E_i - dt * power < g.E_min) {
    s.underflow = true;
    s.alpha_i = 0.0;
    w.setZero();
  } else {
    s.E_i = std::clamp(s.E_i - dt * power, g.E_min, g.E_max);
  }
  s.alpha_i = std::min(s.alpha_i, tank_alpha(s.E_i, g));
  return w;
}

}  // namespace mmctl
