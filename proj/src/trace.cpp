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

#include "mmctl/trace.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mmctl {

namespace {

constexpr Channel kChannels[] = {Channel::kQ,       Channel::kQd,   Channel::kTauCmd, Channel::kTauMeas,
                                 Channel::kTauApp,  Channel::kForce, Channel::kPose,  Channel::kTask,
                                 Channel::kNull,    Channel::kCor,  Channel::kCa,     Channel::kMa,
                                 Channel::kReadTime, Channel::kFlags};

const char* stem(Channel c) {
  switch (c) {
    case Channel::kQ:
      return "q";
    case Channel::kQd:
      return "qd";
    case Channel::kTauCmd:
      return "tau_cmd";
    case Channel::kTauMeas:
      return "tau_meas";
    case Channel::kTauApp:
      return "tau_app";
    case Channel::kForce:
      return "F";
    case Channel::kPose:
      return "x";
    case Channel::kTask:
      return "tau_task";
    case Channel::kNull:
      return "tau_null";
    case Channel::kCor:
      return "tau_cor";
    case Channel::kCa:
      return "tau_ca";
    case Channel::kMa:
      return "tau_ma";
    case Channel::kReadTime:
      return "read_time";
    case Channel::kFlags:
      return "flags";
  }
  return "?";
}

const char* const kPoseNames[] = {"x", "y", "z", "qw", "qx", "qy", "qz"};
const char* const kForceNames[] = {"fx", "fy", "fz", "mx", "my", "mz"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int Trace::channel_width(Channel c, int dof) {
  switch (c) {
    case Channel::kForce:
      return 6;
    case Channel::kPose:
      return 7;
    case Channel::kReadTime:
    case Channel::kFlags:
      return 1;
    default:
      return dof;
  }
}

Trace::Trace(int robots, int dof) : robots_(robots), dof_(dof) {
  if (robots < 1 || dof < 1 || dof > kMaxDof) throw ContractError("trace: bad shape");
  names_ = {"tick", "time"};
  per_robot_ = 0;
  for (Channel c : kChannels) per_robot_ += channel_width(c, dof);
  for (int r = 0; r < robots; ++r) {
    const std::string p = "r" + std::to_string(r) + ".";
    for (Channel c : kChannels) {
      const int w = channel_width(c, dof);
      for (int j = 0; j < w; ++j) {
        std::string name = p + stem(c);
        if (c == Channel::kPose) {
          name = p + "ee_" + kPoseNames[j];
        } else if (c == Channel::kForce) {
          name = p + kForceNames[j];
        } else if (w > 1) {
          name += std::to_string(j);
        }
        names_.push_back(std::move(name));
      }
    }
  }
  width_ = static_cast<int>(names_.size());
}

double* Trace::append_row() {
  data_.resize(data_.size() + width_, 0.0);
  return row(rows_++);
}

int Trace::offset(int robot, Channel c) const {
  int off = 2 + robot * per_robot_;
  for (Channel k : kChannels) {
    if (k == c) return off;
    off += channel_width(k, dof_);
  }
  return -1;
}

int Trace::column(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Eigen::Map<const Eigen::VectorXd> Trace::get(std::size_t i, int robot, Channel c) const {
  return {row(i) + offset(robot, c), channel_width(c, dof_)};
}

Eigen::Map<Eigen::VectorXd> Trace::get(std::size_t i, int robot, Channel c) {
  return {row(i) + offset(robot, c), channel_width(c, dof_)};
}

std::vector<double> Trace::series(int robot, Channel c, int element) const {
  const int col = offset(robot, c) + element;
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = row(i)[col];
  return out;
}

Trace Trace::sorted() const {
  std::vector<std::size_t> idx(rows_);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return tick(a) < tick(b); });
  Trace out = *this;
  for (std::size_t i = 0; i < rows_; ++i) std::copy(row(idx[i]), row(idx[i]) + width_, out.row(i));
  return out;
}

std::string Trace::to_csv() const {
  std::string out;
  out.reserve((rows_ + 1) * width_ * 12);
  for (int i = 0; i < width_; ++i) {
    if (i) out += ',';
    out += names_[i];
  }
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* v = row(r);
    for (int i = 0; i < width_; ++i) {
      if (i) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void Trace::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("trace: cannot write " + path);
  const std::string text = to_csv();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw ContractError("trace: write failed for " + path);
}

Trace Trace::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace: empty file", 1);
  const std::vector<std::string> header = split(line);
  int robots = 0, dof = 0;
  for (const auto& h : header) {
    if (h.rfind("r", 0) == 0 && h.find(".q") != std::string::npos) {
      const std::size_t dot = h.find('.');
      const std::string rest = h.substr(dot + 1);
      if (rest.size() > 1 && rest[0] == 'q' && std::isdigit(static_cast<unsigned char>(rest[1]))) {
        robots = std::max(robots, std::atoi(h.c_str() + 1) + 1);
        dof = std::max(dof, std::atoi(rest.c_str() + 1) + 1);
      }
    }
  }
  if (robots == 0 || dof == 0 || dof > kMaxDof) throw FormatError("trace: header names no joint columns", 1);
  Trace t(robots, dof);
  if (header != t.names_) {
    for (std::size_t i = 0; i < std::max(header.size(), t.names_.size()); ++i) {
      if (i >= header.size() || i >= t.names_.size() || header[i] != t.names_[i]) {
        const std::string want = i < t.names_.size() ? t.names_[i] : "<end>";
        const std::string got = i < header.size() ? header[i] : "<end>";
        throw FormatError("trace: column " + std::to_string(i + 1) + " is '" + got + "', expected '" + want + "'", 1);
      }
    }
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    double* v = t.append_row();
    const char* p = line.c_str();
    for (int i = 0; i < t.width_; ++i) {
      char* end = nullptr;
      errno = 0;
      v[i] = std::strtod(p, &end);
      if (end == p || errno == ERANGE) {
        throw FormatError("trace: bad number in column " + std::to_string(i + 1), line_no);
      }
      p = end;
      if (i + 1 < t.width_) {
        if (*p != ',') throw FormatError("trace: expected " + std::to_string(t.width_) + " columns", line_no);
        ++p;
      }
    }
    if (*p != '\0' && *p != '\r') throw FormatError("trace: trailing data", line_no);
  }
  return t;
}

Trace Trace::read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("trace: cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace mmctl
