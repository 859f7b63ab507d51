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

#include "mmctl/manager.hpp"

#include <bit>
#include <set>
#include <sstream>

namespace mmctl {

TimeMode parse_time_mode(std::string_view s) {
  if (s == "virtual") return TimeMode::kVirtual;
  if (s == "wall" || s == "wall-clock" || s == "wallclock") return TimeMode::kWallClock;
  throw ContractError("unknown time mode '" + std::string(s) + "' (virtual|wall)");
}

const char* to_string(TimeMode m) { return m == TimeMode::kVirtual ? "virtual" : "wall"; }

const char* to_string(RequestOutcome o) {
  switch (o) {
    case RequestOutcome::kAccepted:
      return "accepted";
    case RequestOutcome::kNoop:
      return "noop";
    case RequestOutcome::kUnknownName:
      return "unknown";
    case RequestOutcome::kConflict:
      return "conflict";
    case RequestOutcome::kInvalidValue:
      return "invalid";
  }
  return "?";
}

Manager::Manager(std::vector<ControlletDescriptor> descriptors,
                 const std::vector<std::string>& initial_active, SharedRobotBus bus, ManagerConfig cfg)
    : cfg_(cfg), bus_(std::move(bus)), start_(std::chrono::steady_clock::now()) {
  if (!(cfg_.dt > 0.0)) throw ContractError("manager: dt must be positive");
  if (bus_.size() < 1 || bus_.size() > 64) throw ContractError("manager: 1 to 64 robots");
  if (descriptors.size() > static_cast<std::size_t>(kMaxControllets)) {
    throw ContractError("manager: at most 64 controllets");
  }

  std::set<std::string> names;
  std::vector<std::string> errors;
  for (const auto& d : descriptors) {
    if (!names.insert(d.name).second) errors.push_back("duplicate controllet name '" + d.name + "'");
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "controllet registry rejected:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ContractError(os.str());
  }

  for (const auto& d : descriptors) {
    controllets_.push_back(make_controllet(d, bus_));
    std::uint64_t mask = 0;
    for (int r : d.robots) mask |= std::uint64_t{1} << r;
    claims_.push_back(mask);
  }

  std::uint64_t initial = 0;
  for (const auto& n : initial_active) {
    const int i = find(n);
    if (i < 0) {
      errors.push_back("unknown initial controllet '" + n + "'");
      continue;
    }
    initial |= std::uint64_t{1} << i;
  }
  for (int r = 0; r < bus_.size(); ++r) {
    std::vector<int> claimants;
    for (int i = 0; i < controllet_count(); ++i) {
      if ((initial >> i & 1) && (claims_[i] >> r & 1)) claimants.push_back(i);
    }
    if (claimants.size() > 1) {
      std::string line = "robot " + std::to_string(r) + ": ";
      for (std::size_t j = 0; j < claimants.size(); ++j) {
        line += (j ? "/" : "") + controllets_[claimants[j]]->name();
      }
      errors.push_back(line);
    }
  }
  if (!errors.empty()) {
    std::ostringstream os;
    os << "controllet registry rejected:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ContractError(os.str());
  }

  active_ = initial;
  needs_activation_ = initial;
  owner_.assign(bus_.size(), -1);
  rebuild_owners();
  log_.reserve(cfg_.record_capacity);
  if (cfg_.record_timing) timing_.reserve(cfg_.record_capacity);
}

int Manager::find(std::string_view name) const {
  for (int i = 0; i < controllet_count(); ++i) {
    if (controllets_[i]->name() == name) return i;
  }
  return -1;
}

std::vector<std::string> Manager::active_names() const {
  std::vector<std::string> out;
  for (int i = 0; i < controllet_count(); ++i) {
    if (active_ >> i & 1) out.push_back(controllets_[i]->name());
  }
  return out;
}

double Manager::now() const {
  if (cfg_.time_mode == TimeMode::kVirtual) {
    return static_cast<double>(last_tick_.load(std::memory_order_acquire)) * cfg_.dt;
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

double Manager::tick_time(long k) const {
  if (cfg_.time_mode == TimeMode::kVirtual) return static_cast<double>(k) * cfg_.dt;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

std::uint64_t Manager::push(Message m) {
  std::lock_guard<std::mutex> lock(submit_mutex_);
  m.seq = next_seq_;
  m.after_tick = last_tick_.load(std::memory_order_acquire);
  if (!inbox_.push(m)) return 0;
  return next_seq_++;
}

std::uint64_t Manager::request_switch(const std::vector<std::string>& names,
                                      std::optional<double> received_time) {
  Message m;
  m.kind = RequestKind::kSwitch;
  for (const auto& n : names) {
    const int i = find(n);
    if (i < 0) {
      m.unknown = true;
      continue;
    }
    m.set |= std::uint64_t{1} << i;
  }
  m.received_time = received_time ? *received_time : now();
  return push(m);
}

std::uint64_t Manager::request_set(const std::string& controllet, const std::string& param, double value,
                                   std::optional<double> received_time) {
  Message m;
  m.kind = RequestKind::kSet;
  m.controllet = find(controllet);
  m.param = m.controllet >= 0 ? controllets_[m.controllet]->param_id(param) : -1;
  m.unknown = m.param < 0;
  m.value = value;
  m.received_time = received_time ? *received_time : now();
  return push(m);
}

std::uint64_t Manager::request_stop() {
  Message m;
  m.kind = RequestKind::kStop;
  m.received_time = now();
  return push(m);
}

bool Manager::find_conflict(std::uint64_t set, int* robot, int* a, int* b) const {
  std::uint64_t seen = 0;
  for (int i = 0; i < controllet_count(); ++i) {
    if (!(set >> i & 1)) continue;
    const std::uint64_t overlap = seen & claims_[i];
    if (overlap) {
      *robot = std::countr_zero(overlap);
      *b = i;
      for (int j = 0; j < i; ++j) {
        if ((set >> j & 1) && (claims_[j] >> *robot & 1)) {
          *a = j;
          break;
        }
      }
      return true;
    }
    seen |= claims_[i];
  }
  return false;
}

void Manager::rebuild_owners() {
  for (auto& o : owner_) o = -1;
  for (int i = 0; i < controllet_count(); ++i) {
    if (!(active_ >> i & 1)) continue;
    for (int r : controllets_[i]->robots()) {
      if (owner_[r] >= 0) ++health_.ownership_violations;
      owner_[r] = i;
    }
  }
}

void Manager::finish(const SwitchRecord& r) {
  if (log_.size() < log_.capacity()) log_.push_back(r);
  replies_.push(r);  // dropped when nobody reads replies
}

void Manager::handle(const Message& m, long k) {
  SwitchRecord rec;
  rec.seq = m.seq;
  rec.kind = m.kind;
  rec.request_tick = m.after_tick;
  const double t_now = tick_time(k);

  switch (m.kind) {
    case RequestKind::kStop:
      stop_.store(true, std::memory_order_release);
      rec.first_compute_tick = k;
      rec.latency_ticks = static_cast<int>(k - m.after_tick);
      rec.latency_ms = (t_now - m.received_time) * 1e3;
      finish(rec);
      return;
    case RequestKind::kSet: {
      if (m.unknown) {
        rec.outcome = RequestOutcome::kUnknownName;
      } else if (!controllets_[m.controllet]->param_valid(m.param, m.value)) {
        rec.outcome = RequestOutcome::kInvalidValue;
      } else {
        controllets_[m.controllet]->apply_param(m.param, m.value);
        rec.first_compute_tick = k;
        rec.latency_ticks = static_cast<int>(k - m.after_tick);
        rec.latency_ms = (t_now - m.received_time) * 1e3;
      }
      finish(rec);
      return;
    }
    case RequestKind::kSwitch:
      break;
  }

  if (m.unknown) {
    rec.outcome = RequestOutcome::kUnknownName;
    finish(rec);
    return;
  }
  if (find_conflict(m.set, &rec.conflict_robot, &rec.conflict_a, &rec.conflict_b)) {
    rec.outcome = RequestOutcome::kConflict;
    finish(rec);
    return;
  }
  if (m.set == active_) {
    rec.outcome = RequestOutcome::kNoop;
    rec.first_compute_tick = k;
    rec.latency_ticks = static_cast<int>(k - m.after_tick);
    rec.latency_ms = (t_now - m.received_time) * 1e3;
    finish(rec);
    return;
  }
  // Prepare: newcomers take their initial state from this tick's snapshot.
  const std::uint64_t newcomers = m.set & ~active_;
  for (int i = 0; i < controllet_count(); ++i) {
    if (newcomers >> i & 1) controllets_[i]->activate(bus_);
  }
  pending_ = Pending{m, m.set, k};
}

void Manager::boundary(long k) {
  if (needs_activation_) {
    for (int i = 0; i < controllet_count(); ++i) {
      if (needs_activation_ >> i & 1) controllets_[i]->activate(bus_);
    }
    needs_activation_ = 0;
  }

  if (pending_ && pending_->prepare_tick < k) {
    const Pending p = *pending_;
    pending_.reset();
    active_ = p.set;
    rebuild_owners();
    SwitchRecord rec;
    rec.seq = p.msg.seq;
    rec.kind = RequestKind::kSwitch;
    rec.request_tick = p.msg.after_tick;
    rec.first_compute_tick = k;
    rec.latency_ticks = static_cast<int>(k - p.msg.after_tick);
    rec.latency_ms = (tick_time(k) - p.msg.received_time) * 1e3;
    finish(rec);
  }

  // Requests queued behind an uncommitted switch wait for the commit.
  while (!pending_) {
    const Message* m = inbox_.peek();
    if (m == nullptr || m->after_tick >= k) break;
    const Message msg = *m;
    inbox_.pop();
    handle(msg, k);
  }
}

void Manager::hold_gravity(RobotSlot& s, std::uint32_t extra_flags) {
  s.terms.reset(s.model->dof());
  s.terms.cor = s.dyn.g;
  const ComposedCommand c = compose_command(s.terms, s.model->effort_limits());
  s.tau_cmd = c.tau;
  s.flags |= kFlagGravityHold | extra_flags | c.saturated;
}

void Manager::tick(long k, std::span<const PlantOutput> sensors, std::span<const TargetSlot> targets) {
  const int n_robots = bus_.size();
  if (sensors.size() != static_cast<std::size_t>(n_robots) ||
      targets.size() != static_cast<std::size_t>(n_robots)) {
    throw ContractError("manager: one sensor and one target slot per robot");
  }
  const auto t0 = std::chrono::steady_clock::now();

  for (int r = 0; r < n_robots; ++r) {
    bus_.update(r, k, sensors[r].state, sensors[r].F_EE);
    RobotSlot& s = bus_.robot(r);
    s.target = targets[r];
    s.flags = 0;
  }

  boundary(k);

  for (int r = 0; r < n_robots; ++r) {
    bus_.robot(r).owner = owner_[r];
  }

  for (int i = 0; i < controllet_count(); ++i) {
    if (!(active_ >> i & 1)) continue;
    Controllet& c = *controllets_[i];
    bool threw = false;
    try {
      c.compute(bus_, cfg_.dt);
    } catch (...) {
      threw = true;
    }
    for (int r : c.robots()) {
      RobotSlot& s = bus_.robot(r);
      if (s.owner != i) {
        ++health_.ownership_violations;
        continue;
      }
      ComposedCommand cmd;
      if (!threw) cmd = compose_command(s.terms, s.model->effort_limits());
      if (threw || cmd.fault) {
        ++health_.faults;
        hold_gravity(s, kFlagFault);
      } else {
        s.tau_cmd = cmd.tau;
        s.flags |= cmd.saturated;
      }
    }
  }

  for (int r = 0; r < n_robots; ++r) {
    RobotSlot& s = bus_.robot(r);
    if (s.owner < 0) hold_gravity(s, 0);
    if (s.stamp >= 0 && s.stamp != k - 1) ++health_.stamp_gaps;
    s.stamp = k;
  }

  last_tick_.store(k, std::memory_order_release);
  if (cfg_.record_timing && timing_.size() < timing_.capacity()) {
    timing_.push_back(
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
  }
}

}  // namespace mmctl
