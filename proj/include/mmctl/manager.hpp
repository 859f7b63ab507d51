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

// The multimode controller: owns the bus, arbitrates robot ownership among
// controllets, runs them once per tick and services switch and parameter
// requests at tick boundaries.
//
// Switch timing: a request that arrives after tick k is validated at the
// boundary of tick k+1. An accepted request activates the newcomers there
// while the old set still computes tick k+1; the new set computes from tick
// k+2 on. Robots therefore never miss a command during a switch.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmctl/controllet.hpp"
#include "mmctl/mailbox.hpp"
#include "mmctl/plant.hpp"

namespace mmctl {

inline constexpr int kMaxControllets = 64;

enum class TimeMode { kVirtual, kWallClock };

TimeMode parse_time_mode(std::string_view s);
const char* to_string(TimeMode m);

enum class RequestKind : std::uint8_t { kSwitch, kSet, kStop };

enum class RequestOutcome : std::uint8_t {
  kAccepted,
  kNoop,          // switch to the already active set
  kUnknownName,
  kConflict,      // two requested controllets claim one robot
  kInvalidValue,  // parameter out of range
};

const char* to_string(RequestOutcome o);

// Outcome of one request. Fixed size so the tick can publish it without
// allocating.
struct SwitchRecord {
  std::uint64_t seq = 0;
  RequestKind kind = RequestKind::kSwitch;
  RequestOutcome outcome = RequestOutcome::kAccepted;
  long request_tick = -1;        // last tick completed when the request arrived
  long first_compute_tick = -1;  // first tick computed by the new set
  int latency_ticks = 0;
  double latency_ms = 0.0;
  int conflict_robot = -1;
  int conflict_a = -1;  // registry indices of the conflicting pair
  int conflict_b = -1;

  bool accepted() const {
    return outcome == RequestOutcome::kAccepted || outcome == RequestOutcome::kNoop;
  }
};

struct ManagerConfig {
  double dt = 1e-3;
  TimeMode time_mode = TimeMode::kVirtual;
  std::size_t record_capacity = 4096;  // switch log and timing samples kept
  bool record_timing = false;
};

// Per-tick invariant counters. All zero in a healthy run.
struct ManagerHealth {
  long ownership_violations = 0;
  long stamp_gaps = 0;
  long faults = 0;  // robots that fell back to gravity compensation
};

class Manager {
 public:
  // Throws ContractError for duplicate names, unknown initial names, or
  // overlapping initial claims; the message lists every conflict.
  Manager(std::vector<ControlletDescriptor> descriptors, const std::vector<std::string>& initial_active,
          SharedRobotBus bus, ManagerConfig cfg = {});

  SharedRobotBus& bus() { return bus_; }
  const SharedRobotBus& bus() const { return bus_; }
  int controllet_count() const { return static_cast<int>(controllets_.size()); }
  const Controllet& controllet(int i) const { return *controllets_[i]; }
  int find(std::string_view name) const;

  // Names of the active set, in registry order.
  std::vector<std::string> active_names() const;
  int owner(int robot) const { return owner_[robot]; }

  // Runs tick k: publishes sensors and targets (world frame) to the bus,
  // applies pending requests, computes every active controllet once and
  // writes a stamped command for every robot. Allocation-free.
  void tick(long k, std::span<const PlantOutput> sensors, std::span<const TargetSlot> targets);

  // Commands of the last tick, one per robot.
  const VecN& command(int robot) const { return bus_.robot(robot).tau_cmd; }

  // Thread-safe submitters; names are resolved here, off the tick thread.
  // received_time defaults to the manager clock. Returns the request
  // sequence number, or 0 if the mailbox is full.
  std::uint64_t request_switch(const std::vector<std::string>& names,
                               std::optional<double> received_time = std::nullopt);
  std::uint64_t request_set(const std::string& controllet, const std::string& param, double value,
                            std::optional<double> received_time = std::nullopt);
  std::uint64_t request_stop();

  // Replies in request order; call from a single thread.
  std::optional<SwitchRecord> poll_reply() { return replies_.pop(); }

  bool stop_requested() const { return stop_.load(std::memory_order_acquire); }
  bool switch_pending() const { return pending_.has_value(); }

  // Seconds on the manager clock: tick time in virtual mode, time since
  // construction in wall-clock mode.
  double now() const;

  const std::vector<SwitchRecord>& switch_log() const { return log_; }
  const std::vector<double>& compute_times_us() const { return timing_; }
  const ManagerHealth& health() const { return health_; }
  bool healthy() const {
    return health_.ownership_violations == 0 && health_.stamp_gaps == 0;
  }

 private:
  struct Message {
    std::uint64_t seq = 0;
    RequestKind kind = RequestKind::kSwitch;
    std::uint64_t set = 0;  // controllet bitmask for switches
    bool unknown = false;
    int controllet = -1;
    int param = -1;
    double value = 0.0;
    long after_tick = -1;
    double received_time = 0.0;
  };
  struct Pending {
    Message msg;
    std::uint64_t set = 0;
    long prepare_tick = -1;
  };

  std::uint64_t push(Message m);
  void boundary(long k);
  void handle(const Message& m, long k);
  void finish(const SwitchRecord& r);
  // Lowest robot claimed twice in `set`, with the two registry indices.
  bool find_conflict(std::uint64_t set, int* robot, int* a, int* b) const;
  void rebuild_owners();
  void hold_gravity(RobotSlot& s, std::uint32_t extra_flags);
  double tick_time(long k) const;

  ManagerConfig cfg_;
  SharedRobotBus bus_;
  std::vector<std::unique_ptr<Controllet>> controllets_;
  std::vector<std::uint64_t> claims_;  // robot bitmask per controllet
  std::uint64_t active_ = 0;
  std::uint64_t needs_activation_ = 0;
  std::vector<int> owner_;
  std::optional<Pending> pending_;

  SpscRing<Message, 256> inbox_;
  SpscRing<SwitchRecord, 256> replies_;
  std::mutex submit_mutex_;
  std::uint64_t next_seq_ = 1;
  std::atomic<long> last_tick_{-1};
  std::atomic<bool> stop_{false};
  std::chrono::steady_clock::time_point start_;

  std::vector<SwitchRecord> log_;
  std::vector<double> timing_;
  ManagerHealth health_;
};

}  // namespace mmctl
