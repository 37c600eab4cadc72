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

#ifndef FDPP_FINETUNE_METRICS_H_
#define FDPP_FINETUNE_METRICS_H_

#include <optional>
#include <vector>

#include "fdpp/envs/env.h"
#include "fdpp/envs/trajectory.h"
#include "json.hpp"

namespace fdpp::finetune {

// Episode-level behavior statistics. Feature averages run over every visited
// state s_0..s_T of an episode and are then averaged over episodes; terminal
// values use s_T. Fields that do not apply to the env are empty.
struct Metrics {
  int episodes = 0;
  double success_rate = 0.0;
  double rollout_len = 0.0;
  std::optional<double> constraint_satisfaction;  // push-block
  std::optional<double> occupancy;                // push-block
  std::optional<double> displacement_avg;         // place-align
  std::optional<double> displacement_term;
  std::optional<double> misalign_avg;
  std::optional<double> misalign_term;
  std::optional<double> kl_mean;
  std::optional<double> mean_reward;
};

// True when the pusher stays outside the forbidden region at every state
// with t >= grace_steps. Always true for place-align.
bool satisfies_constraint(const envs::Trajectory& episode, const envs::EnvConfig& config);

Metrics compute_metrics(const std::vector<envs::Trajectory>& episodes,
                        const envs::EnvConfig& config);

nlohmann::ordered_json to_json(const Metrics& metrics);
Metrics metrics_from_json(const nlohmann::ordered_json& j);

}  // namespace fdpp::finetune

#endif  // FDPP_FINETUNE_METRICS_H_
