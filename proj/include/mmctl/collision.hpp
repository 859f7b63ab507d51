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

// Link-segment self-collision avoidance. Each arm is a polyline through
// chosen frame origins; every configured segment pair closer than the
// threshold is pushed apart by a linear repulsive force mapped to joint
// torques through the point Jacobians of the closest points.
#pragma once

#include <span>
#include <vector>

#include "mmctl/kinematics.hpp"

namespace mmctl {

struct SegmentDistance {
  double distance = 0.0;
  double s = 0.0;  // parameter on the first segment, [0, 1]
  double t = 0.0;  // parameter on the second segment, [0, 1]
  Vec3 p = Vec3::Zero();
  Vec3 q = Vec3::Zero();
};

// Closest points between segments [a0, a1] and [b0, b1] (clamped quadratic,
// all degenerate branches handled).
SegmentDistance segment_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1);

struct CollisionConfig {
  // Frame indices (0 base, i joint i, n+1 end-effector) whose origins form
  // the polyline; the same list is used for every arm.
  std::vector<int> anchors{0, 2, 4, 6, 8};
  double threshold = 0.05;  // m
  double gain = 500.0;      // N/m
  // Segment index pairs checked within one arm, in addition to all
  // cross-arm pairs.
  std::vector<std::pair<int, int>> self_pairs;

  void validate() const;
};

// A robot's view for collision evaluation.
struct CollisionBody {
  const RobotModel* model = nullptr;
  const ChainFrames* frames = nullptr;
  Transform base;
};

enum CollisionFlag : unsigned {
  kCollisionActive = 1u << 0,
  kCollisionFallbackPrevious = 1u << 1,
  kCollisionFallbackAxis = 1u << 2,
};

// Stateful evaluator: remembers the last separation direction per pair so
// that touching segments (d = 0) keep a defined push direction.
class CollisionAvoidance {
 public:
  CollisionAvoidance() = default;
  CollisionAvoidance(CollisionConfig cfg, int n_robots);

  // Adds each robot's repulsion torque into tau_out[r] (sized to dof).
  // Returns a CollisionFlag mask; min_distance receives the closest pair
  // distance seen this call.
  unsigned accumulate(std::span<const CollisionBody> bodies, std::span<VecN> tau_out,
                      double* min_distance = nullptr);

  const CollisionConfig& config() const { return cfg_; }
  // Runtime retuning of the repulsion; the pair set stays fixed.
  void set_response(double threshold, double gain);

 private:
  struct Pair {
    int ra, sa, rb, sb;
  };
  void add_force(const CollisionBody& body, int segment, double s, const Vec3& force,
                 VecN& tau) const;

  CollisionConfig cfg_;
  std::vector<Pair> pairs_;
  std::vector<Vec3> last_dir_;
  std::vector<char> has_dir_;
};

}  // namespace mmctl
