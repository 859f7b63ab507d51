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

#include "mmctl/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmctl {

int parallel_threads() { return omp_get_max_threads(); }

void normal_equations(const Eigen::MatrixXd& Y, const Eigen::VectorXd& y, Exec exec, Eigen::MatrixXd* A,
                      Eigen::VectorXd* b) {
  if (Y.rows() != y.size()) throw ContractError("normal_equations: row mismatch");
  const Eigen::Index p = Y.cols();
  if (exec == Exec::kSerial) {
    *A = Y.transpose() * Y;
    *b = Y.transpose() * y;
    return;
  }
  const Eigen::Index rows = Y.rows();
  const int blocks = static_cast<int>((rows + kReductionBlock - 1) / kReductionBlock);
  std::vector<Eigen::MatrixXd> partA(blocks);
  std::vector<Eigen::VectorXd> partb(blocks);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < blocks; ++k) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(k) * kReductionBlock;
    const Eigen::Index nr = std::min<Eigen::Index>(kReductionBlock, rows - r0);
    const auto Yk = Y.middleRows(r0, nr);
    partA[k].noalias() = Yk.transpose() * Yk;
    partb[k].noalias() = Yk.transpose() * y.segment(r0, nr);
  }
  A->setZero(p, p);
  b->setZero(p);
  for (int k = 0; k < blocks; ++k) {
    *A += partA[k];
    *b += partb[k];
  }
}

namespace {

double pearson(std::span<const double> a, std::span<const double> b, int lag) {
  const long n = static_cast<long>(std::min(a.size(), b.size()));
  const long i0 = std::max(0L, -static_cast<long>(lag));
  const long i1 = std::min(n, n - lag);
  const long m = i1 - i0;
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double ma = 0.0, mb = 0.0;
  for (long i = i0; i < i1; ++i) {
    ma += a[i];
    mb += b[i + lag];
  }
  ma /= m;
  mb /= m;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (long i = i0; i < i1; ++i) {
    const double da = a[i] - ma, db = b[i + lag] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<double> correlation_scan(std::span<const double> a, std::span<const double> b, int max_lag,
                                     Exec exec) {
  if (max_lag < 0) throw ContractError("correlation_scan: negative lag bound");
  const int count = 2 * max_lag + 1;
  std::vector<double> out(count);
  if (exec == Exec::kSerial) {
    for (int k = 0; k < count; ++k) out[k] = pearson(a, b, k - max_lag);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int k = 0; k < count; ++k) out[k] = pearson(a, b, k - max_lag);
  return out;
}

MassMatrixCheck batch_mass_matrix_check(const RobotModel& model, std::span<const VecN> qs, Exec exec) {
  const long n = static_cast<long>(qs.size());
  std::vector<MassMatrixCheck> part(n);
  auto one = [&](long i) {
    const MatN M = mass_matrix(model, qs[i]);
    MassMatrixCheck c;
    c.max_asymmetry = (M - M.transpose()).cwiseAbs().maxCoeff();
    const MatN S = 0.5 * (M + M.transpose());
    c.min_eigenvalue = Eigen::SelfAdjointEigenSolver<MatN>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    part[i] = c;
  };
  if (exec == Exec::kSerial) {
    for (long i = 0; i < n; ++i) one(i);
  } else {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) one(i);
  }
  MassMatrixCheck out;
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& c : part) {
    out.max_asymmetry = std::max(out.max_asymmetry, c.max_asymmetry);
    out.min_eigenvalue = std::min(out.min_eigenvalue, c.min_eigenvalue);
  }
  return out;
}

}  // namespace mmctl
