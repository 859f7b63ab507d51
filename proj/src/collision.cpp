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

#include "mmctl/collision.hpp"

#include <algorithm>
#include <limits>

namespace mmctl {

namespace {
constexpr double kTiny = 1e-12;
}  // namespace

SegmentDistance segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1) {
  const Vec3 d1 = a1 - a0;
  const Vec3 d2 = b1 - b0;
  const Vec3 r = a0 - b0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;

  if (a <= kTiny && e <= kTiny) {
    // both degenerate
  } else if (a <= kTiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kTiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kTiny * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }

  SegmentDistance out;
  out.s = s;
  out.t = t;
  out.p = a0 + s * d1;
  out.q = b0 + t * d2;
  out.distance = (out.p - out.q).norm();
  return out;
}

void CollisionConfig::validate() const {
  if (!(threshold > 0.0)) throw ContractError("collision: threshold must be positive");
  if (!(gain >= 0.0)) throw ContractError("collision: gain must be non-negative");
  if (anchors.size() < 2) throw ContractError("collision: at least two anchor frames required");
  const int segments = static_cast<int>(anchors.size()) - 1;
  for (const auto& [i, j] : self_pairs) {
    if (i < 0 || j < 0 || i >= segments || j >= segments || i == j) {
      throw ContractError("collision: self pair references an invalid segment");
    }
  }
}

CollisionAvoidance::CollisionAvoidance(CollisionConfig cfg, int n_robots) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (n_robots < 1) throw ContractError("collision: need at least one robot");
  if (n_robots < 2 && cfg_.self_pairs.empty()) {
    throw ContractError("collision: a single robot needs self pairs");
  }
  const int segments = static_cast<int>(cfg_.anchors.size()) - 1;
  for (int ra = 0; ra < n_robots; ++ra) {
    for (const auto& [i, j] : cfg_.self_pairs) pairs_.push_back({ra, i, ra, j});
    for (int rb = ra + 1; rb < n_robots; ++rb) {
      for (int i = 0; i < segments; ++i) {
        for (int j = 0; j < segments; ++j) pairs_.push_back({ra, i, rb, j});
      }
    }
  }
  last_dir_.assign(pairs_.size(), Vec3::Zero());
  has_dir_.assign(pairs_.size(), 0);
}

void CollisionAvoidance::set_response(double threshold, double gain) {
  if (!(threshold > 0.0) || !(gain >= 0.0)) throw ContractError("collision: invalid response");
  cfg_.threshold = threshold;
  cfg_.gain = gain;
}

void CollisionAvoidance::add_force(const CollisionBody& body, int segment, double s,
                                   const Vec3& force, VecN& tau) const {
  const Vec3 local_force = body.base.rotation.transpose() * force;
  const int fa = cfg_.anchors[segment];
  const int fb = cfg_.anchors[segment + 1];
  // The point moves as the same convex combination of the two anchors.
  const Vec3 pa = frame_origin(*body.frames, fa);
  const Vec3 pb = frame_origin(*body.frames, fb);
  const Jac3 J = (1.0 - s) * point_jacobian(*body.frames, fa, pa) +
                 s * point_jacobian(*body.frames, fb, pb);
  tau.noalias() += J.transpose() * local_force;
}

unsigned CollisionAvoidance::accumulate(std::span<const CollisionBody> bodies,
                                        std::span<VecN> tau_out, double* min_distance) {
  unsigned flags = 0;
  double dmin = std::numeric_limits<double>::infinity();
  const int n_anchor = static_cast<int>(cfg_.anchors.size());
  for (std::size_t r = 0; r < bodies.size(); ++r) {
    const int n = bodies[r].frames->n;
    for (int k = 0; k < n_anchor; ++k) {
      if (cfg_.anchors[k] < 0 || cfg_.anchors[k] > n + 1) {
        throw ContractError("collision: anchor frame out of range");
      }
    }
  }

  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const Pair& pr = pairs_[k];
    if (pr.ra >= static_cast<int>(bodies.size()) || pr.rb >= static_cast<int>(bodies.size())) {
      throw ContractError("collision: fewer bodies than configured robots");
    }
    const CollisionBody& A = bodies[pr.ra];
    const CollisionBody& B = bodies[pr.rb];
    auto world = [](const CollisionBody& b, int frame) {
      return b.base.apply(frame_origin(*b.frames, frame));
    };
    const SegmentDistance sd =
        segment_distance(world(A, cfg_.anchors[pr.sa]), world(A, cfg_.anchors[pr.sa + 1]),
                         world(B, cfg_.anchors[pr.sb]), world(B, cfg_.anchors[pr.sb + 1]));
    dmin = std::min(dmin, sd.distance);

    Vec3 dir;
    if (sd.distance > kTiny) {
      dir = (sd.p - sd.q) / sd.distance;
      last_dir_[k] = dir;
      has_dir_[k] = 1;
    } else if (has_dir_[k]) {
      dir = last_dir_[k];
      flags |= kCollisionFallbackPrevious;
    } else {
      dir = Vec3::UnitZ();
      flags |= kCollisionFallbackAxis;
    }
    if (sd.distance >= cfg_.threshold) continue;

    flags |= kCollisionActive;
    const Vec3 force = cfg_.gain * (cfg_.threshold - sd.distance) * dir;
    add_force(A, pr.sa, sd.s, force, tau_out[pr.ra]);
    add_force(B, pr.sb, sd.t, -force, tau_out[pr.rb]);
  }
  if (min_distance) *min_distance = dmin;
  return flags;
}

}  // namespace mmctl
