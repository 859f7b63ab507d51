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

#include "mmctl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "mmctl/bus.hpp"

namespace mmctl {

double rmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Reduction r) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError("rmse: shape mismatch");
  if (a.rows() < 2 || a.cols() < 1) throw ContractError("rmse: need at least 2 aligned samples");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    sum += (a.row(i) - b.row(i)).squaredNorm();
  }
  const double n = static_cast<double>(a.rows()) * (r == Reduction::kElementwise ? a.cols() : 1);
  return std::sqrt(sum / n);
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("rmse: length mismatch");
  if (a.size() < 2) throw ContractError("rmse: need at least 2 aligned samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

namespace {

// Linear interpolation of s at t (t within s's support).
struct Interp {
  const TimeSeries& s;
  std::size_t i = 0;
  double at(double t) {
    while (i + 2 < s.t.size() && s.t[i + 1] < t) ++i;
    const double t0 = s.t[i], t1 = s.t[i + 1];
    if (t <= t0) return s.v[i];
    if (t >= t1) return s.v[i + 1];
    const double u = (t - t0) / (t1 - t0);
    return s.v[i] + u * (s.v[i + 1] - s.v[i]);
  }
};

void check_series(const TimeSeries& s, const char* name) {
  if (s.t.size() != s.v.size() || s.t.size() < 2) {
    throw ContractError(std::string("estimate_delay: series ") + name + " needs matching t/v with >= 2 samples");
  }
  for (std::size_t i = 1; i < s.t.size(); ++i) {
    if (!(s.t[i] > s.t[i - 1])) {
      throw ContractError(std::string("estimate_delay: series ") + name + " timestamps must increase");
    }
  }
}

}  // namespace

DelayEstimate estimate_delay(const TimeSeries& a, const TimeSeries& b, const DelayOptions& opt) {
  check_series(a, "a");
  check_series(b, "b");
  const double lo = std::max(a.t.front(), b.t.front());
  const double hi = std::min(a.t.back(), b.t.back());
  if (!(hi - lo >= opt.min_overlap)) throw ContractError("estimate_delay: overlap shorter than the minimum");

  // Union of timestamps over the overlap.
  std::vector<double> u;
  u.reserve(a.t.size() + b.t.size());
  std::merge(a.t.begin(), a.t.end(), b.t.begin(), b.t.end(), std::back_inserter(u));
  u.erase(std::remove_if(u.begin(), u.end(), [&](double t) { return t < lo || t > hi; }), u.end());
  u.erase(std::unique(u.begin(), u.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }), u.end());
  if (u.size() < 3) throw ContractError("estimate_delay: too few samples in the overlap");
  std::vector<double> gaps(u.size() - 1);
  for (std::size_t i = 0; i + 1 < u.size(); ++i) gaps[i] = u[i + 1] - u[i];
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double h = gaps[gaps.size() / 2];

  const std::size_t n = static_cast<std::size_t>(std::floor((hi - lo) / h + 1e-9)) + 1;
  std::vector<double> ra(n), rb(n);
  Interp ia{a}, ib{b};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::min(lo + static_cast<double>(i) * h, hi);
    ra[i] = ia.at(t);
    rb[i] = ib.at(t);
  }

  const int max_lag = std::min(static_cast<int>(std::floor(opt.max_lag / h + 1e-9)), static_cast<int>(n) - 2);
  const std::vector<double> c = correlation_scan(ra, rb, max_lag, opt.exec);
  int best = -1;
  for (int k = 0; k < static_cast<int>(c.size()); ++k) {
    if (std::isfinite(c[k]) && (best < 0 || c[k] > c[best])) best = k;
  }
  if (best < 0) throw ContractError("estimate_delay: flat series, delay undefined");

  double offset = 0.0;
  const bool exact = c[best] >= 1.0 - 1e-12;
  if (!exact && best > 0 && best + 1 < static_cast<int>(c.size()) && std::isfinite(c[best - 1]) &&
      std::isfinite(c[best + 1])) {
    const double y0 = c[best - 1], y1 = c[best], y2 = c[best + 1];
    const double den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) offset = std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
  }
  DelayEstimate out;
  out.ms = (best - max_lag + offset) * h * 1e3;
  out.peak = c[best];
  out.step_ms = h * 1e3;
  return out;
}

TimingSummary timing_summary(std::string label, std::span<const double> samples_us) {
  TimingSummary s;
  s.label = std::move(label);
  s.count = samples_us.size();
  if (s.count == 0) return s;
  double sum = 0.0;
  for (double v : samples_us) sum += v;
  s.mean = sum / s.count;
  double var = 0.0;
  for (double v : samples_us) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / s.count);
  std::vector<double> sorted(samples_us.begin(), samples_us.end());
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double p) {
    const std::size_t i = static_cast<std::size_t>(std::ceil(p * s.count)) - 1;
    return sorted[std::min(i, s.count - 1)];
  };
  s.p50 = pct(0.50);
  s.p99 = pct(0.99);
  s.max = sorted.back();
  return s;
}

std::string timing_table(const std::vector<TimingSummary>& rows) {
  std::string out = "condition    samples    mean_us     std_us     p50_us     p99_us     max_us\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %9zu %10.2f %10.2f %10.2f %10.2f %10.2f\n", r.label.c_str(), r.count,
                  r.mean, r.std, r.p50, r.p99, r.max);
    out += buf;
  }
  return out;
}

Eigen::MatrixXd channel_matrix(const Trace& trace, int robot, Channel c, int first, int count) {
  const int w = Trace::channel_width(c, trace.dof());
  if (count < 0) count = w - first;
  if (first < 0 || first + count > w) throw ContractError("channel_matrix: component range");
  Eigen::MatrixXd m(trace.rows(), count);
  const int off = trace.offset(robot, c) + first;
  for (std::size_t i = 0; i < trace.rows(); ++i) {
    for (int j = 0; j < count; ++j) m(i, j) = trace.row(i)[off + j];
  }
  return m;
}

Eigen::MatrixXd control_error(const Trace& trace, int robot) {
  if (robot < 0 || robot >= trace.robots()) throw FormatError("control_error: trace has no robot " + std::to_string(robot));
  return channel_matrix(trace, robot, Channel::kTauCmd) - channel_matrix(trace, robot, Channel::kTauMeas);
}

namespace {

// Rows of t whose tick is in `ticks` (both sorted).
Trace select_ticks(const Trace& t, const std::vector<long>& ticks) {
  Trace out(t.robots(), t.dof());
  out.reserve(ticks.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < t.rows() && j < ticks.size(); ++i) {
    if (t.tick(i) == ticks[j]) {
      std::copy(t.row(i), t.row(i) + t.width(), out.append_row());
      ++j;
    }
  }
  return out;
}

}  // namespace

DelayEstimate command_delay(const Trace& trace, int robot, const DelayOptions& opt, int joint) {
  if (robot < 0 || robot >= trace.robots()) throw ContractError("command_delay: no such robot");
  if (joint >= trace.dof()) throw ContractError("command_delay: no such joint");
  auto value = [&](std::size_t i, Channel c) {
    const auto v = trace.get(i, robot, c);
    return joint < 0 ? v.norm() : v[joint];
  };
  TimeSeries write, read;
  for (std::size_t i = 0; i < trace.rows(); ++i) {
    write.t.push_back(trace.time(i));
    write.v.push_back(value(i, Channel::kTauCmd));
    read.t.push_back(trace.get(i, robot, Channel::kReadTime)[0]);
    read.v.push_back(value(i, Channel::kTauApp));
  }
  return estimate_delay(write, read, opt);
}

FidelityReport fidelity(const Trace& sim_in, const Trace& ref_in, int robot, const DelayOptions& opt) {
  if (sim_in.dof() != ref_in.dof() || robot >= sim_in.robots() || robot >= ref_in.robots()) {
    throw ContractError("fidelity: traces do not match");
  }
  const Trace s_sorted = sim_in.sorted(), r_sorted = ref_in.sorted();
  std::vector<long> common;
  for (std::size_t i = 0, j = 0; i < s_sorted.rows() && j < r_sorted.rows();) {
    const long a = s_sorted.tick(i), b = r_sorted.tick(j);
    if (a == b) {
      if (common.empty() || common.back() != a) common.push_back(a);
      ++i;
      ++j;
    } else if (a < b) {
      ++i;
    } else {
      ++j;
    }
  }
  if (common.size() < 2) throw ContractError("fidelity: traces share fewer than 2 ticks");
  const Trace sim = select_ticks(s_sorted, common), ref = select_ticks(r_sorted, common);

  FidelityReport r;
  r.robot = robot;
  r.samples = common.size();
  r.q = rmse(channel_matrix(sim, robot, Channel::kQ), channel_matrix(ref, robot, Channel::kQ));
  r.qd = rmse(channel_matrix(sim, robot, Channel::kQd), channel_matrix(ref, robot, Channel::kQd));
  r.tau = rmse(channel_matrix(sim, robot, Channel::kTauMeas), channel_matrix(ref, robot, Channel::kTauMeas));
  r.x = rmse(channel_matrix(sim, robot, Channel::kPose, 0, 3), channel_matrix(ref, robot, Channel::kPose, 0, 3),
             Reduction::kNorm);
  r.F = rmse(channel_matrix(sim, robot, Channel::kForce, 0, 3), channel_matrix(ref, robot, Channel::kForce, 0, 3),
             Reduction::kNorm);
  r.c_err = rmse(control_error(sim, robot), control_error(ref, robot));
  try {
    r.delay_ms = command_delay(ref, robot, opt).ms;
  } catch (const ContractError&) {
    r.delay_ms = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t i = 0; i < ref.rows(); ++i) {
    const auto flags = static_cast<std::uint32_t>(ref.get(i, robot, Channel::kFlags)[0]);
    const auto sflags = static_cast<std::uint32_t>(sim.get(i, robot, Channel::kFlags)[0]);
    if ((flags | sflags) & kFlagPlantFault) r.valid = false;
  }
  return r;
}

FidelityReport mean_report(const std::vector<FidelityReport>& trials) {
  if (trials.empty()) throw ContractError("mean_report: no trials");
  FidelityReport m;
  m.robot = trials.front().robot;
  double delay_sum = 0.0;
  int delay_n = 0;
  for (const auto& t : trials) {
    m.q += t.q;
    m.qd += t.qd;
    m.tau += t.tau;
    m.x += t.x;
    m.F += t.F;
    m.c_err += t.c_err;
    m.samples += t.samples;
    m.valid = m.valid && t.valid;
    if (std::isfinite(t.delay_ms)) {
      delay_sum += t.delay_ms;
      ++delay_n;
    }
  }
  const double n = static_cast<double>(trials.size());
  m.q /= n;
  m.qd /= n;
  m.tau /= n;
  m.x /= n;
  m.F /= n;
  m.c_err /= n;
  m.delay_ms = delay_n ? delay_sum / delay_n : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::string fidelity_table(const std::vector<FidelityReport>& rows, const std::vector<std::string>& labels) {
  int w = 12;
  for (const auto& l : labels) w = std::max(w, static_cast<int>(l.size()));
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %5s %10s %10s %10s %10s %10s %10s %9s %8s %s\n", w, "run", "robot", "q_rad",
                "qd_rad_s", "tau_Nm", "x_m", "F_N", "Cerr_Nm", "delay_ms", "samples", "valid");
  std::string out = buf;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::snprintf(buf, sizeof buf, "%-*s %5d %10.4g %10.4g %10.4g %10.4g %10.4g %10.4g %9.3f %8zu %s\n", w,
                  i < labels.size() ? labels[i].c_str() : "", r.robot, r.q, r.qd, r.tau, r.x, r.F, r.c_err,
                  r.delay_ms, r.samples, r.valid ? "yes" : "no");
    out += buf;
  }
  return out;
}

}  // namespace mmctl
