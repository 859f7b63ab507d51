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

// Per-tick run trace: one fixed-width row of doubles per tick, written as
// CSV with a header row.
//
// Row k holds the measured state at tick k, the command computed from it,
// its term decomposition, and the torque the plant applied while stepping
// from k to k+1 (tau_app, plus its noisy reading tau_meas) together with
// the time the plant sampled that command (read_time).
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mmctl/types.hpp"

namespace mmctl {

enum class Channel {
  kQ,
  kQd,
  kTauCmd,
  kTauMeas,
  kTauApp,
  kForce,  // estimated F_EE, base frame (6)
  kPose,   // end-effector in world: x y z qw qx qy qz (7)
  kTask,
  kNull,
  kCor,
  kCa,
  kMa,
  kReadTime,
  kFlags,
};

class Trace {
 public:
  Trace() = default;
  Trace(int robots, int dof);

  int robots() const { return robots_; }
  int dof() const { return dof_; }
  int width() const { return width_; }
  std::size_t rows() const { return rows_; }
  const std::vector<std::string>& header() const { return names_; }

  void reserve(std::size_t rows) { data_.reserve(rows * width_); }
  // Appends a zeroed row; allocation-free within the reserved capacity.
  double* append_row();
  double* row(std::size_t i) { return data_.data() + i * width_; }
  const double* row(std::size_t i) const { return data_.data() + i * width_; }

  int offset(int robot, Channel c) const;
  static int channel_width(Channel c, int dof);
  int column(std::string_view name) const;  // -1 when absent

  long tick(std::size_t i) const { return static_cast<long>(row(i)[0]); }
  double time(std::size_t i) const { return row(i)[1]; }
  Eigen::Map<const Eigen::VectorXd> get(std::size_t i, int robot, Channel c) const;
  Eigen::Map<Eigen::VectorXd> get(std::size_t i, int robot, Channel c);

  // Column of one channel element over all rows.
  std::vector<double> series(int robot, Channel c, int element) const;

  // Rows sorted by tick (stable).
  Trace sorted() const;

  void write_csv(const std::string& path) const;
  std::string to_csv() const;
  // Throws FormatError naming the line for malformed input.
  static Trace parse_csv(const std::string& text);
  static Trace read_csv(const std::string& path);

  bool operator==(const Trace& o) const {
    return robots_ == o.robots_ && dof_ == o.dof_ && rows_ == o.rows_ && data_ == o.data_;
  }

 private:
  int robots_ = 0;
  int dof_ = 0;
  int width_ = 0;
  int per_robot_ = 0;
  std::vector<std::string> names_;
  std::vector<double> data_;
  std::size_t rows_ = 0;
};

}  // namespace mmctl
