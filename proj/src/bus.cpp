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

#include "mmctl/bus.hpp"

namespace mmctl {

SharedRobotBus::SharedRobotBus(std::vector<const RobotModel*> models, std::vector<Transform> bases) {
  if (models.size() != bases.size()) throw ContractError("bus: one base per robot");
  slots_.resize(models.size());
  for (std::size_t r = 0; r < models.size(); ++r) {
    if (models[r] == nullptr) throw ContractError("bus: missing model");
    RobotSlot& s = slots_[r];
    const int n = models[r]->dof();
    s.model = models[r];
    s.base = bases[r];
    s.state.q = models[r]->home;
    s.state.qd = VecN::Zero(n);
    s.state.qdd = VecN::Zero(n);
    s.frames = compute_frames(*s.model, s.state.q);
    s.dyn = dynamics(*s.model, s.frames, s.state);
    s.target.q = s.state.q;
    s.target.qd = VecN::Zero(n);
    s.target.pose = s.dyn.x;
    s.terms.reset(n);
    s.tau_cmd = VecN::Zero(n);
  }
}

void SharedRobotBus::update(int r, long tick, const JointState& state, const Vec6& F_ext) {
  RobotSlot& s = slots_[r];
  s.state.timestamp = state.timestamp;
  s.state.q = state.q;
  s.state.qd = state.qd;
  s.frames = compute_frames(*s.model, s.state.q);
  s.dyn = dynamics(*s.model, s.frames, s.state);
  s.F_ext = F_ext;
  s.tick = tick;
}

}  // namespace mmctl
