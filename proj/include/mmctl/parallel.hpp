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

// Batch kernels with a plain serial reference and an OpenMP version. The
// parallel versions split work into fixed blocks and reduce the partial
// results in block order, so their output does not depend on the thread
// count.
#pragma once

#include <span>
#include <vector>

#include "mmctl/dynamics.hpp"

namespace mmctl {

enum class Exec { kSerial, kParallel };

int parallel_threads();

// Rows per block in the blocked reductions.
inline constexpr int kReductionBlock = 512;

// A = Y^T Y and b = Y^T y.
void normal_equations(const Eigen::MatrixXd& Y, const Eigen::VectorXd& y, Exec exec, Eigen::MatrixXd* A,
                      Eigen::VectorXd* b);

// Pearson correlation of a[i] and b[i + lag] over the overlap, for every
// lag in [-max_lag, max_lag]. Entry max_lag + lag. NaN where either side is
// flat over the overlap.
std::vector<double> correlation_scan(std::span<const double> a, std::span<const double> b, int max_lag,
                                     Exec exec);

struct MassMatrixCheck {
  double max_asymmetry = 0.0;  // max |M - M^T|
  double min_eigenvalue = 0.0;
};

// Symmetry and definiteness of M over many configurations.
MassMatrixCheck batch_mass_matrix_check(const RobotModel& model, std::span<const VecN> qs, Exec exec);

}  // namespace mmctl
