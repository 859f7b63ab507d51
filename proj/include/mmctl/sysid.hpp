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

// Inertial parameter identification. Per link, ten parameters in the link
// frame: m, m*c (3), and the inertia about the link origin
// (xx, xy, xz, yy, yz, zz). Rigid-body torque is linear in them:
// tau - armature .* qdd = Y(q, qd, qdd) pi.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmctl/parallel.hpp"
#include "mmctl/trace.hpp"

namespace mmctl {

inline constexpr int kLinkParams = 10;

Eigen::VectorXd extract_parameters(const RobotModel& model);

// Replaces the inertial parameters; links whose ten values are unchanged
// keep their original representation, so extract/apply round-trips
// bit-exactly. Throws ContractError for a non-physical link.
RobotModel apply_identified(const RobotModel& model, const Eigen::VectorXd& pi);

bool parameters_physical(const Eigen::VectorXd& pi);

// Mass clamped to >= 1 g; COM inertia eigenvalues clamped so the principal
// moments are positive and satisfy the triangle inequality.
Eigen::VectorXd project_physical(const Eigen::VectorXd& pi);

// n x 10n regressor of the rigid-body inverse dynamics (gravity included).
Eigen::MatrixXd regressor(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd);

struct RegressorSample {
  VecN q, qd, qdd, tau;
};

// Stacks Y and y = tau - armature .* qdd over all samples.
void stack_regressor(const RobotModel& model, std::span<const RegressorSample> samples, Exec exec,
                     Eigen::MatrixXd* Y, Eigen::VectorXd* y);

struct IdentifyOptions {
  double lambda = 1e-8;  // pull toward the prior, relative to the largest eigenvalue of Y^T Y
  double rank_tol = 1e-10;  // eigenvalues below rank_tol * max count as unidentifiable
  double warn_condition = 1e8;
  Exec exec = Exec::kParallel;
};

struct IdentifyResult {
  Eigen::VectorXd pi;
  Eigen::VectorXd prior;
  Eigen::VectorXd singular_values;  // of the stacked regressor, descending
  int rank = 0;
  double condition = 0.0;  // of the identifiable block
  bool warning = false;    // condition above warn_condition
  bool projected = false;
  Eigen::VectorXd confidence;  // per parameter in [0, 1]: share explained by the data
  double fit_rmse = 0.0;       // N·m on the identification samples
};

// argmin |Y pi - y|^2 + lambda |pi - prior|^2 through an eigendecomposition
// of the normal equations; projected to physical consistency only when the
// unconstrained result is not.
IdentifyResult identify(const RobotModel& model, std::span<const RegressorSample> samples,
                        const Eigen::VectorXd& prior, const IdentifyOptions& opt = {});

std::string parameter_report(const IdentifyResult& r, const RobotModel& model);

// Second-order Butterworth low-pass (bilinear transform).
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};
Biquad butterworth_lowpass(double cutoff_hz, double sample_hz);

// Forward-backward filtering (zero phase) with edge reflection.
std::vector<double> filtfilt(const Biquad& f, std::span<const double> x);

struct SampleOptions {
  double cutoff_hz = 30.0;
  int stride = 5;   // keep every stride-th sample
  int trim = 100;   // drop filter edge transients at both ends
};

// Filtered central-difference accelerations from a recorded run. tau is the
// applied-torque reading averaged over the two steps the central
// difference spans.
std::vector<RegressorSample> samples_from_trace(const Trace& trace, int robot, double dt,
                                                const SampleOptions& opt = {});

// Per-joint sum of three sines around a center posture.
struct Excitation {
  VecN center;
  Eigen::MatrixXd amplitude;  // dof x 3
  Eigen::MatrixXd phase;      // dof x 3
  std::array<double, 3> freq_hz{0.1, 0.3, 0.7};

  VecN q(double t) const;
  VecN qd(double t) const;
};

struct ExcitationOptions {
  double duration = 20.0;
  double range_fraction = 0.5;  // total amplitude as a fraction of the distance to the nearer limit
  double plane_z = -1e9;        // world z the arm must stay above
  double clearance = 0.05;
  int retries = 10;             // each retry scales the amplitude by 0.8
  std::uint64_t seed = 1;
};

// Throws ContractError when no scaled version clears the plane.
Excitation make_excitation(const RobotModel& model, const Transform& base, const VecN& center,
                           const ExcitationOptions& opt);

// Lowest world z of the end-effector (the only point the plant gives
// contact) along the excitation, sampled every 10 ms.
double lowest_point(const RobotModel& model, const Transform& base, const Excitation& e, double duration);

}  // namespace mmctl
