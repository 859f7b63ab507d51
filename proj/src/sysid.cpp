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

#include "mmctl/sysid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "mmctl/dynamics.hpp"

namespace mmctl {

namespace {

constexpr double kMinMass = 1e-3;
constexpr double kMinMoment = 1e-7;  // kg·m², smallest pseudo-inertia eigenvalue after projection
constexpr double kFeasibleMargin = 1e-9;
constexpr double kProximity = 1e-3;

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

// I v = L(v) [xx xy xz yy yz zz]^T
Eigen::Matrix<double, 3, 6> inertia_map(const Vec3& v) {
  Eigen::Matrix<double, 3, 6> L;
  L << v.x(), v.y(), v.z(), 0, 0, 0,
       0, v.x(), 0, v.y(), v.z(), 0,
       0, 0, v.x(), 0, v.y(), v.z();
  return L;
}

Mat3 unpack_inertia(const Eigen::Ref<const Eigen::VectorXd>& p) {
  Mat3 I;
  I << p[0], p[1], p[2], p[1], p[3], p[4], p[2], p[4], p[5];
  return I;
}

void pack_link(double m, const Vec3& h, const Mat3& I_o, Eigen::Ref<Eigen::VectorXd> out) {
  out[0] = m;
  out.segment<3>(1) = h;
  out[4] = I_o(0, 0);
  out[5] = I_o(0, 1);
  out[6] = I_o(0, 2);
  out[7] = I_o(1, 1);
  out[8] = I_o(1, 2);
  out[9] = I_o(2, 2);
}

void check_pi(const Eigen::VectorXd& pi, int links) {
  if (pi.size() != static_cast<Eigen::Index>(links) * kLinkParams)
    throw ContractError("parameter vector has " + std::to_string(pi.size()) + " entries, expected " +
                        std::to_string(links * kLinkParams));
  if (!pi.allFinite()) throw ContractError("parameter vector is not finite");
}

// COM-frame inertia of one packed link; mass must be positive.
Mat3 com_inertia(const Eigen::Ref<const Eigen::VectorXd>& p) {
  const double m = p[0];
  const Vec3 h = p.segment<3>(1);
  const Mat3 Sh = skew(h);
  const Mat3 I = unpack_inertia(p.segment<6>(4)) - Sh.transpose() * Sh / m;
  return 0.5 * (I + I.transpose());
}

}  // namespace

Eigen::VectorXd extract_parameters(const RobotModel& model) {
  const int n = model.dof();
  Eigen::VectorXd pi(n * kLinkParams);
  for (int i = 0; i < n; ++i) {
    const auto& l = model.links[i];
    const Mat3 S = skew(l.com);
    const Mat3 I_o = l.inertia + l.mass * S.transpose() * S;
    pack_link(l.mass, l.mass * l.com, I_o, pi.segment<kLinkParams>(i * kLinkParams));
  }
  return pi;
}

bool parameters_physical(const Eigen::VectorXd& pi) {
  if (pi.size() % kLinkParams != 0 || !pi.allFinite()) return false;
  for (Eigen::Index i = 0; i < pi.size() / kLinkParams; ++i) {
    const auto p = pi.segment<kLinkParams>(i * kLinkParams);
    if (!(p[0] > 0.0)) return false;
    if (!is_physical(p[0], com_inertia(p))) return false;
  }
  return true;
}

RobotModel apply_identified(const RobotModel& model, const Eigen::VectorXd& pi) {
  const int n = model.dof();
  check_pi(pi, n);
  const Eigen::VectorXd current = extract_parameters(model);
  RobotModel out = model;
  bool changed = false;
  for (int i = 0; i < n; ++i) {
    const auto p = pi.segment<kLinkParams>(i * kLinkParams);
    if (p == current.segment<kLinkParams>(i * kLinkParams)) continue;
    changed = true;
    if (!(p[0] > 0.0)) throw ContractError("link " + std::to_string(i + 1) + ": non-positive mass");
    const Mat3 I_c = com_inertia(p);
    if (!is_physical(p[0], I_c))
      throw ContractError("link " + std::to_string(i + 1) + ": inertia is not physically consistent");
    out.links[i].mass = p[0];
    out.links[i].com = p.segment<3>(1) / p[0];
    out.links[i].inertia = 0.5 * (I_c + I_c.transpose());
  }
  if (changed) ++out.version;
  return out;
}

namespace {

// Pseudo-inertia [[S, h], [h^T, m]] with S the second moment of the mass
// distribution about the link origin, S = tr(I_o)/2 * 1 - I_o. A link is
// physical exactly when this matrix is positive definite.
Eigen::Matrix4d pseudo_inertia(const Eigen::Ref<const Eigen::VectorXd>& p) {
  const Mat3 I_o = unpack_inertia(p.segment<6>(4));
  Eigen::Matrix4d J;
  J.topLeftCorner<3, 3>() = 0.5 * I_o.trace() * Mat3::Identity() - I_o;
  J.topRightCorner<3, 1>() = p.segment<3>(1);
  J.bottomLeftCorner<1, 3>() = p.segment<3>(1).transpose();
  J(3, 3) = p[0];
  return J;
}

void from_pseudo_inertia(const Eigen::Matrix4d& J, Eigen::Ref<Eigen::VectorXd> out) {
  const Mat3 S = J.topLeftCorner<3, 3>();
  pack_link(J(3, 3), J.topRightCorner<3, 1>(), S.trace() * Mat3::Identity() - S, out);
}

// Nearest parameters (in the metric below) whose pseudo-inertias have all
// eigenvalues >= kMinMoment.
Eigen::VectorXd project_psd(const Eigen::VectorXd& pi) {
  Eigen::VectorXd out = pi;
  for (Eigen::Index i = 0; i < pi.size() / kLinkParams; ++i) {
    auto p = out.segment<kLinkParams>(i * kLinkParams);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(pseudo_inertia(p));
    if (es.eigenvalues().minCoeff() >= kMinMoment) continue;
    const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(kMinMoment);
    Eigen::Matrix4d J = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    from_pseudo_inertia(0.5 * (J + J.transpose()), p);
  }
  return out;
}

// Phase-one barrier method: minimizes s + kProximity |z|^2 subject to
// pseudo_inertia_i(pi + N z) + s I > 0 for every link, stopping as soon as
// s < -kFeasibleMargin. Returns the best z found. The proximity term keeps
// z small: the columns of N are unseen only up to round-off.
Eigen::VectorXd feasible_offset(const Eigen::VectorXd& pi, const Eigen::MatrixXd& N) {
  const int links = static_cast<int>(pi.size() / kLinkParams);
  const int r = static_cast<int>(N.cols());
  const int dim = r + 1;  // z, then s
  std::array<Eigen::Matrix4d, kLinkParams> E;
  for (int k = 0; k < kLinkParams; ++k) E[k] = pseudo_inertia(Eigen::VectorXd::Unit(kLinkParams, k));
  std::vector<Eigen::Matrix4d> base(links);
  // D[i][m]: derivative of link i's matrix along z_m.
  std::vector<std::vector<Eigen::Matrix4d>> D(links, std::vector<Eigen::Matrix4d>(r));
  double worst = 0.0;
  for (int i = 0; i < links; ++i) {
    base[i] = pseudo_inertia(pi.segment<kLinkParams>(i * kLinkParams));
    worst = std::min(worst, Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(base[i]).eigenvalues()[0]);
    for (int m = 0; m < r; ++m) {
      D[i][m].setZero();
      for (int k = 0; k < kLinkParams; ++k) D[i][m] += N(i * kLinkParams + k, m) * E[k];
    }
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  x[r] = -worst + 1.0;
  auto matrices = [&](const Eigen::VectorXd& v, std::vector<Eigen::Matrix4d>* A) {
    for (int i = 0; i < links; ++i) {
      (*A)[i] = base[i] + v[r] * Eigen::Matrix4d::Identity();
      for (int m = 0; m < r; ++m) (*A)[i] += v[m] * D[i][m];
    }
  };
  auto barrier = [&](const Eigen::VectorXd& v, double t, double* value) {
    std::vector<Eigen::Matrix4d> A(links);
    matrices(v, &A);
    double f = t * (v[r] + kProximity * v.head(r).squaredNorm());
    for (const auto& a : A) {
      Eigen::LLT<Eigen::Matrix4d> llt(a);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::Matrix4d L = llt.matrixL();
      for (int d = 0; d < 4; ++d) {
        if (!(L(d, d) > 0.0)) return false;
        f -= 2.0 * std::log(L(d, d));
      }
    }
    *value = f;
    return true;
  };
  std::vector<Eigen::Matrix4d> A(links);
  double t = 1.0;
  for (int outer = 0; outer < 40 && x[r] >= -kFeasibleMargin; ++outer) {
    for (int newton = 0; newton < 50; ++newton) {
      matrices(x, &A);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
      g[r] = t;
      g.head(r) = 2.0 * t * kProximity * x.head(r);
      H.topLeftCorner(r, r).diagonal().setConstant(2.0 * t * kProximity);
      for (int i = 0; i < links; ++i) {
        const Eigen::Matrix4d Ainv = A[i].inverse();
        std::vector<Eigen::Matrix4d> P(dim);
        for (int m = 0; m < r; ++m) P[m] = Ainv * D[i][m];
        P[r] = Ainv;
        for (int m = 0; m < dim; ++m) {
          g[m] -= P[m].trace();
          for (int l = m; l < dim; ++l) {
            const double h = (P[m].array() * P[l].transpose().array()).sum();
            H(m, l) += h;
            if (l != m) H(l, m) += h;
          }
        }
      }
      const Eigen::VectorXd step = -H.ldlt().solve(g);
      const double decrement = -g.dot(step);
      if (!(decrement > 1e-12)) break;
      double f0;
      barrier(x, t, &f0);
      double alpha = 1.0, f1;
      while (alpha > 1e-12 && (!barrier(x + alpha * step, t, &f1) || f1 > f0 - 0.25 * alpha * decrement))
        alpha *= 0.5;
      if (alpha <= 1e-12) break;
      x += alpha * step;
      if (x[r] < -kFeasibleMargin) break;
    }
    t *= 10.0;
  }
  return x.head(r);
}

}  // namespace

Eigen::VectorXd project_physical(const Eigen::VectorXd& pi) {
  if (pi.size() % kLinkParams != 0) throw ContractError("project_physical: bad parameter count");
  Eigen::VectorXd out = pi;
  for (Eigen::Index i = 0; i < pi.size() / kLinkParams; ++i) {
    auto p = out.segment<kLinkParams>(i * kLinkParams);
    p = project_psd(Eigen::VectorXd(p));
    // Raising the mass keeps the pseudo-inertia positive definite.
    p[0] = std::max(p[0], kMinMass);
  }
  return out;
}

Eigen::MatrixXd regressor(const RobotModel& model, const VecN& q, const VecN& qd, const VecN& qdd) {
  const int n = model.dof();
  if (q.size() != n || qd.size() != n || qdd.size() != n) throw ContractError("regressor: size mismatch");
  const ChainFrames f = compute_frames(model, q);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, n * kLinkParams);

  Vec3 w = Vec3::Zero();
  Vec3 wd = Vec3::Zero();
  Vec3 a = -model.gravity;
  Vec3 p_prev = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3& z = f.axis[i];
    const Vec3& p = f.joint[i].translation;
    const Mat3& R = f.joint[i].rotation;
    const Vec3 d = p - p_prev;
    a += wd.cross(d) + w.cross(w.cross(d));
    const Vec3 w_new = w + z * qd[i];
    wd += z * qdd[i] + w.cross(z * qd[i]);
    w = w_new;
    p_prev = p;

    const Vec3 wl = R.transpose() * w;
    const Vec3 wdl = R.transpose() * wd;
    const Vec3 al = R.transpose() * a;
    const Mat3 Sw = skew(wl);
    // Link-frame force and moment about the link origin, linear in
    // [m, h, I_o].
    Eigen::Matrix<double, 3, kLinkParams> Fl = Eigen::Matrix<double, 3, kLinkParams>::Zero();
    Eigen::Matrix<double, 3, kLinkParams> Nl = Eigen::Matrix<double, 3, kLinkParams>::Zero();
    Fl.col(0) = al;
    Fl.block<3, 3>(0, 1) = skew(wdl) + Sw * Sw;
    Nl.block<3, 3>(0, 1) = -skew(al);
    Nl.block<3, 6>(0, 4) = inertia_map(wdl) + Sw * inertia_map(wl);

    const Eigen::Matrix<double, 3, kLinkParams> Fb = R * Fl;
    const Eigen::Matrix<double, 3, kLinkParams> Nb = R * Nl;
    for (int j = 0; j <= i; ++j) {
      const Vec3 r = p - f.joint[j].translation;
      const Vec3& zj = f.axis[j];
      // z . (r x F) = (z x r) . F
      Y.block<1, kLinkParams>(j, i * kLinkParams) = zj.transpose() * Nb + zj.cross(r).transpose() * Fb;
    }
  }
  return Y;
}

void stack_regressor(const RobotModel& model, std::span<const RegressorSample> samples, Exec exec,
                     Eigen::MatrixXd* Y, Eigen::VectorXd* y) {
  const int n = model.dof();
  const long count = static_cast<long>(samples.size());
  Y->resize(count * n, n * kLinkParams);
  y->resize(count * n);
  const VecN arm = model.armature();
  auto one = [&](long s) {
    const auto& smp = samples[s];
    Y->middleRows(s * n, n) = regressor(model, smp.q, smp.qd, smp.qdd);
    y->segment(s * n, n) = smp.tau - arm.cwiseProduct(smp.qdd);
  };
  if (exec == Exec::kSerial) {
    for (long s = 0; s < count; ++s) one(s);
  } else {
#pragma omp parallel for schedule(static)
    for (long s = 0; s < count; ++s) one(s);
  }
}

IdentifyResult identify(const RobotModel& model, std::span<const RegressorSample> samples,
                        const Eigen::VectorXd& prior, const IdentifyOptions& opt) {
  const int n = model.dof();
  check_pi(prior, n);
  const int p = n * kLinkParams;
  if (samples.size() * static_cast<std::size_t>(n) < static_cast<std::size_t>(p))
    throw ContractError("identify: " + std::to_string(samples.size()) + " samples cannot determine " +
                        std::to_string(p) + " parameters");
  if (!(opt.lambda >= 0.0) || !(opt.rank_tol > 0.0)) throw ContractError("identify: bad options");

  Eigen::MatrixXd Y;
  Eigen::VectorXd y;
  stack_regressor(model, samples, opt.exec, &Y, &y);
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  normal_equations(Y, y, opt.exec, &A, &b);
  b -= A * prior;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0);  // ascending
  const Eigen::MatrixXd& V = es.eigenvectors();
  const double s_max = s.maxCoeff();
  const double ridge = opt.lambda * s_max;
  const double cutoff = opt.rank_tol * s_max;

  IdentifyResult r;
  r.prior = prior;
  Eigen::VectorXd coeff = V.transpose() * b;
  r.confidence = Eigen::VectorXd::Zero(p);
  double s_min_kept = s_max;
  std::vector<int> free_dirs;  // directions the data does not see
  for (int k = 0; k < p; ++k) {
    if (!(s[k] > cutoff)) free_dirs.push_back(k);
    if (!(s[k] > cutoff) || !std::isfinite(opt.lambda) || ridge + s[k] == ridge) {
      coeff[k] = 0.0;
      continue;
    }
    ++r.rank;
    s_min_kept = std::min(s_min_kept, s[k]);
    const double gain = s[k] / (s[k] + ridge);
    coeff[k] /= (s[k] + ridge);
    r.confidence += gain * V.col(k).cwiseAbs2();
  }
  r.pi = prior + V * coeff;
  r.singular_values = s.reverse().cwiseSqrt();
  r.condition = r.rank > 0 ? std::sqrt(s_max / s_min_kept) : std::numeric_limits<double>::infinity();
  r.warning = r.condition > opt.warn_condition;
  if (!parameters_physical(r.pi)) {
    Eigen::MatrixXd N(p, static_cast<Eigen::Index>(free_dirs.size()));
    for (std::size_t k = 0; k < free_dirs.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = V.col(free_dirs[k]);
    // Any move along unseen directions keeps the fit; look for one that
    // makes every link physical before falling back to clamping.
    Eigen::VectorXd x = r.pi;
    if (N.cols() > 0) x = r.pi + N * feasible_offset(r.pi, N);
    r.pi = parameters_physical(x) ? x : project_physical(x);
    r.projected = true;
  }
  r.fit_rmse = std::sqrt((Y * r.pi - y).squaredNorm() / static_cast<double>(y.size()));
  return r;
}

std::string parameter_report(const IdentifyResult& r, const RobotModel& model) {
  static const char* kNames[kLinkParams] = {"m", "hx", "hy", "hz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz"};
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "rank %d of %ld, condition %.3g%s%s, fit rmse %.4g N*m\n", r.rank,
                static_cast<long>(r.pi.size()), r.condition, r.warning ? " (ill-conditioned)" : "",
                r.projected ? ", projected" : "", r.fit_rmse);
  out += line;
  out += "link  param        prior   identified  confidence\n";
  for (int i = 0; i < model.dof(); ++i) {
    for (int k = 0; k < kLinkParams; ++k) {
      const int idx = i * kLinkParams + k;
      std::snprintf(line, sizeof line, "%4d  %-5s  %11.5g  %11.5g  %10.3f\n", i + 1, kNames[k], r.prior[idx],
                    r.pi[idx], r.confidence[idx]);
      out += line;
    }
  }
  return out;
}

Biquad butterworth_lowpass(double cutoff_hz, double sample_hz) {
  if (!(cutoff_hz > 0.0) || !(sample_hz > 2.0 * cutoff_hz))
    throw ContractError("butterworth_lowpass: cutoff must be in (0, fs/2)");
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_hz);
  const double q = std::numbers::sqrt2;
  const double norm = 1.0 / (1.0 + q * k + k * k);
  Biquad f;
  f.b0 = k * k * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k * k - 1.0) * norm;
  f.a2 = (1.0 - q * k + k * k) * norm;
  return f;
}

namespace {

// Direct form II transposed, initial state at the steady state of x0.
void run_biquad(const Biquad& f, std::vector<double>& x) {
  if (x.empty()) return;
  const double x0 = x.front();
  // Steady state for constant input x0 (unit DC gain).
  double z1 = x0 - f.b0 * x0;
  double z2 = f.b2 * x0 - f.a2 * x0;
  for (double& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

}  // namespace

std::vector<double> filtfilt(const Biquad& f, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(n - 1, 9);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  // Odd reflection about the end points.
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  run_biquad(f, ext);
  std::reverse(ext.begin(), ext.end());
  run_biquad(f, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<long>(pad), ext.begin() + static_cast<long>(pad + n)};
}

std::vector<RegressorSample> samples_from_trace(const Trace& trace, int robot, double dt,
                                                const SampleOptions& opt) {
  if (robot < 0 || robot >= trace.robots()) throw ContractError("samples_from_trace: no such robot");
  if (opt.stride < 1 || opt.trim < 1) throw ContractError("samples_from_trace: stride and trim must be >= 1");
  const Trace t = trace.sorted();
  const long rows = static_cast<long>(t.rows());
  if (rows < 2 * opt.trim + 3) throw ContractError("samples_from_trace: trace too short");
  for (long i = 1; i < rows; ++i)
    if (t.tick(i) != t.tick(i - 1) + 1) throw ContractError("samples_from_trace: ticks are not contiguous");
  const int n = t.dof();
  const Biquad f = butterworth_lowpass(opt.cutoff_hz, 1.0 / dt);
  std::vector<std::vector<double>> qd(n), tau(n);
  for (int j = 0; j < n; ++j) {
    const auto v = t.series(robot, Channel::kQd, j);
    qd[j] = filtfilt(f, v);
    const auto u = t.series(robot, Channel::kTauMeas, j);
    tau[j] = filtfilt(f, u);
  }
  std::vector<RegressorSample> out;
  for (long k = opt.trim; k < rows - opt.trim; k += opt.stride) {
    RegressorSample s;
    s.q = t.get(k, robot, Channel::kQ);
    s.qd.resize(n);
    s.qdd.resize(n);
    s.tau.resize(n);
    for (int j = 0; j < n; ++j) {
      s.qd[j] = qd[j][k];
      s.qdd[j] = (qd[j][k + 1] - qd[j][k - 1]) / (2.0 * dt);
      s.tau[j] = 0.5 * (tau[j][k - 1] + tau[j][k]);
    }
    out.push_back(s);
  }
  return out;
}

namespace {

double envelope(double t, double ramp, double* d) {
  if (t >= ramp) {
    *d = 0.0;
    return 1.0;
  }
  const double w = std::numbers::pi / ramp;
  *d = 0.5 * w * std::sin(w * t);
  return 0.5 * (1.0 - std::cos(w * t));
}

constexpr double kRamp = 2.0;  // s, fade-in so the motion starts at rest at the center

}  // namespace

VecN Excitation::q(double t) const {
  double de;
  const double e = envelope(t, kRamp, &de);
  VecN out = center;
  for (Eigen::Index j = 0; j < center.size(); ++j)
    for (int k = 0; k < 3; ++k)
      out[j] += e * amplitude(j, k) * std::sin(2.0 * std::numbers::pi * freq_hz[k] * t + phase(j, k));
  return out;
}

VecN Excitation::qd(double t) const {
  double de;
  const double e = envelope(t, kRamp, &de);
  VecN out = VecN::Zero(center.size());
  for (Eigen::Index j = 0; j < center.size(); ++j)
    for (int k = 0; k < 3; ++k) {
      const double w = 2.0 * std::numbers::pi * freq_hz[k];
      const double arg = w * t + phase(j, k);
      out[j] += amplitude(j, k) * (de * std::sin(arg) + e * w * std::cos(arg));
    }
  return out;
}

double lowest_point(const RobotModel& model, const Transform& base, const Excitation& e, double duration) {
  double lowest = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::ceil(duration / 0.01));
  for (int s = 0; s <= steps; ++s) {
    lowest = std::min(lowest, base.apply(forward_kinematics(model, e.q(s * 0.01)).position).z());
  }
  return lowest;
}

Excitation make_excitation(const RobotModel& model, const Transform& base, const VecN& center,
                           const ExcitationOptions& opt) {
  const int n = model.dof();
  if (center.size() != n) throw ContractError("make_excitation: center size mismatch");
  if (!(opt.range_fraction > 0.0 && opt.range_fraction <= 1.0)) throw ContractError("make_excitation: bad range fraction");
  const VecN lo = model.lower_limits(), hi = model.upper_limits(), vmax = model.velocity_limits();
  Excitation e;
  e.center = center;
  e.amplitude.resize(n, 3);
  e.phase.resize(n, 3);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
  const double weight[3] = {0.5, 0.3, 0.2};
  double peak_rate = 0.0;  // joint speed per unit total amplitude
  for (int k = 0; k < 3; ++k) peak_rate += weight[k] * 2.0 * std::numbers::pi * e.freq_hz[k];
  for (int j = 0; j < n; ++j) {
    const double room = std::min(center[j] - lo[j], hi[j] - center[j]);
    if (!(room > 0.0)) throw ContractError("make_excitation: center outside joint limits");
    const double total = std::min(opt.range_fraction * room, 0.5 * vmax[j] / peak_rate);
    for (int k = 0; k < 3; ++k) {
      e.amplitude(j, k) = weight[k] * total;
      e.phase(j, k) = uni(rng);
    }
  }
  for (int attempt = 0; attempt <= opt.retries; ++attempt) {
    if (lowest_point(model, base, e, opt.duration) >= opt.plane_z + opt.clearance) return e;
    e.amplitude *= 0.8;
  }
  throw ContractError("make_excitation: no amplitude keeps the arm above the plane");
}

}  // namespace mmctl
