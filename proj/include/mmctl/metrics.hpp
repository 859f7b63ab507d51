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

// Offline analysis of traces: RMSE channels, command-delay estimation,
// loop timing summaries.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmctl/parallel.hpp"
#include "mmctl/trace.hpp"

namespace mmctl {

enum class Reduction {
  kElementwise,  // mean over samples and components
  kNorm,         // Euclidean norm of each sample's difference, then mean
};

// Rows are samples, columns components. Throws ContractError on a shape
// mismatch or fewer than 2 samples.
double rmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Reduction r = Reduction::kElementwise);
double rmse(std::span<const double> a, std::span<const double> b);

struct TimeSeries {
  std::vector<double> t;  // strictly increasing, s
  std::vector<double> v;
};

struct DelayOptions {
  double max_lag = 0.05;      // s, search bound
  double min_overlap = 0.1;   // s
  Exec exec = Exec::kParallel;
};

struct DelayEstimate {
  double ms = 0.0;    // positive when b lags a
  double peak = 0.0;  // correlation at the chosen lag
  double step_ms = 0.0;  // resampling interval
};

// Interpolates both series linearly onto the union of their timestamps,
// resamples at the union's median spacing and picks the lag of maximum
// mean-removed normalized cross-correlation, refined by a parabola through
// the neighbouring lags unless the peak is an exact match. Throws
// ContractError for too little overlap or a flat series.
DelayEstimate estimate_delay(const TimeSeries& a, const TimeSeries& b, const DelayOptions& opt = {});

struct TimingSummary {
  std::string label;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

TimingSummary timing_summary(std::string label, std::span<const double> samples_us);
std::string timing_table(const std::vector<TimingSummary>& rows);

// tau_cmd - tau_meas per row (rows x dof).
Eigen::MatrixXd control_error(const Trace& trace, int robot);

// Rows x width matrix of one channel of one robot.
Eigen::MatrixXd channel_matrix(const Trace& trace, int robot, Channel c, int first = 0, int count = -1);

struct FidelityReport {
  int robot = 0;
  double q = 0.0;      // rad, element-wise
  double qd = 0.0;     // rad/s, element-wise
  double tau = 0.0;    // N·m, measured torque, element-wise
  double x = 0.0;      // m, end-effector position, per-sample norm
  double F = 0.0;      // N, estimated force (3 components), per-sample norm
  double c_err = 0.0;  // N·m, control error, element-wise
  std::size_t samples = 0;
  double delay_ms = 0.0;  // reference plant read vs command write; NaN when undefined
  bool valid = true;
};

// Compares a simulated and a reference trace of the same run on the ticks
// both contain. Throws ContractError when they share fewer than 2 ticks.
FidelityReport fidelity(const Trace& sim, const Trace& ref, int robot, const DelayOptions& opt = {});

// Channel-wise mean of several trials; valid only when all are.
FidelityReport mean_report(const std::vector<FidelityReport>& trials);

std::string fidelity_table(const std::vector<FidelityReport>& rows, const std::vector<std::string>& labels);

// The delay between the command stream and what the plant read, from one
// trace: norm of the torque vectors, or one joint's channel when joint >= 0.
DelayEstimate command_delay(const Trace& trace, int robot, const DelayOptions& opt = {}, int joint = -1);

}  // namespace mmctl
