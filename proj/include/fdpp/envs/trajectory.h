// Copyright 2026 The FDPP Authors
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

#ifndef FDPP_ENVS_TRAJECTORY_H_
#define FDPP_ENVS_TRAJECTORY_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fdpp/envs/env.h"

namespace fdpp::envs {

// states[0..T], actions[0..T-1]; states[t + 1] = step(states[t], actions[t]).
// `labels` is either empty or holds, per step, the expert's intended action
// when the executed action was perturbed.
struct Trajectory {
  std::uint64_t episode = 0;
  std::vector<State> states;
  std::vector<std::vector<double>> actions;
  std::vector<std::vector<double>> labels;

  const State& final_state() const { return states.back(); }
};

// JSONL, one record per visited state:
//   {"episode", "t", "state", "action", "done", "features"}
// plus "label" when the trajectory has labels. The last record of an
// episode carries the terminal state, a null action and done = true.
void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory,
                            const EnvConfig& config);
void write_trajectories(const std::filesystem::path& path,
                        const std::vector<Trajectory>& trajectories,
                        const EnvConfig& config);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

// Replays the logged actions from states[0]; true when every logged state is
// reproduced exactly.
bool replay_matches(const Trajectory& trajectory, const EnvConfig& config);

using ActionFn = std::function<std::vector<double>(const State&)>;

Trajectory run_episode(const EnvConfig& config, std::uint64_t episode_seed,
                       const ActionFn& policy, std::uint64_t episode_index = 0);
// Scripted expert rollout. With action_noise > 0 the executed action is the
// expert action plus N(0, action_noise^2) per component (seeded from the
// episode seed) and the clean expert actions are kept as labels.
Trajectory run_expert_episode(const EnvConfig& config, std::uint64_t episode_seed,
                              std::uint64_t episode_index = 0, double action_noise = 0.0);

}  // namespace fdpp::envs

#endif  // FDPP_ENVS_TRAJECTORY_H_
