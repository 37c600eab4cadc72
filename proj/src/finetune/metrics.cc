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

#include "fdpp/finetune/metrics.h"

#include <stdexcept>

namespace fdpp::finetune {
namespace {

void put(nlohmann::ordered_json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> take(const nlohmann::ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

bool satisfies_constraint(const envs::Trajectory& episode, const envs::EnvConfig& config) {
  if (config.id != envs::EnvId::kPushBlock) return true;
  for (const auto& s : episode.states) {
    if (envs::time_of(s) < config.grace_steps) continue;
    if (envs::feature(s, envs::FeatureId::kRegionOccupancy, config) > 0.5) return false;
  }
  return true;
}

Metrics compute_metrics(const std::vector<envs::Trajectory>& episodes,
                        const envs::EnvConfig& config) {
  if (episodes.empty()) throw std::invalid_argument("compute_metrics: no episodes");
  Metrics m;
  m.episodes = static_cast<int>(episodes.size());
  const bool push = config.id == envs::EnvId::kPushBlock;
  double satisfied = 0, occupancy = 0, disp_avg = 0, disp_term = 0, mis_avg = 0, mis_term = 0;
  for (const auto& ep : episodes) {
    if (ep.states.empty()) throw std::invalid_argument("compute_metrics: empty episode");
    m.success_rate += envs::success(ep.final_state(), config) ? 1.0 : 0.0;
    m.rollout_len += static_cast<double>(ep.actions.size());
    const double n = static_cast<double>(ep.states.size());
    if (push) {
      satisfied += satisfies_constraint(ep, config) ? 1.0 : 0.0;
      double occ = 0;
      for (const auto& s : ep.states) occ += envs::feature(s, envs::FeatureId::kRegionOccupancy, config);
      occupancy += occ / n;
    } else {
      double d = 0, a = 0;
      for (const auto& s : ep.states) {
        d += envs::feature(s, envs::FeatureId::kDisplacement, config);
        a += envs::feature(s, envs::FeatureId::kMisalignment, config);
      }
      disp_avg += d / n;
      mis_avg += a / n;
      disp_term += envs::feature(ep.final_state(), envs::FeatureId::kDisplacement, config);
      mis_term += envs::feature(ep.final_state(), envs::FeatureId::kMisalignment, config);
    }
  }
  const double count = m.episodes;
  m.success_rate /= count;
  m.rollout_len /= count;
  if (push) {
    m.constraint_satisfaction = satisfied / count;
    m.occupancy = occupancy / count;
  } else {
    m.displacement_avg = disp_avg / count;
    m.displacement_term = disp_term / count;
    m.misalign_avg = mis_avg / count;
    m.misalign_term = mis_term / count;
  }
  return m;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["episodes"] = m.episodes;
  j["success_rate"] = m.success_rate;
  j["rollout_len"] = m.rollout_len;
  put(j, "constraint_satisfaction", m.constraint_satisfaction);
  put(j, "occupancy", m.occupancy);
  put(j, "displacement_avg", m.displacement_avg);
  put(j, "displacement_term", m.displacement_term);
  put(j, "misalign_avg", m.misalign_avg);
  put(j, "misalign_term", m.misalign_term);
  put(j, "kl_mean", m.kl_mean);
  put(j, "mean_reward", m.mean_reward);
  return j;
}

Metrics metrics_from_json(const nlohmann::ordered_json& j) {
  Metrics m;
  m.episodes = j.at("episodes").get<int>();
  m.success_rate = j.at("success_rate").get<double>();
  m.rollout_len = j.at("rollout_len").get<double>();
  m.constraint_satisfaction = take(j, "constraint_satisfaction");
  m.occupancy = take(j, "occupancy");
  m.displacement_avg = take(j, "displacement_avg");
  m.displacement_term = take(j, "displacement_term");
  m.misalign_avg = take(j, "misalign_avg");
  m.misalign_term = take(j, "misalign_term");
  m.kl_mean = take(j, "kl_mean");
  m.mean_reward = take(j, "mean_reward");
  return m;
}

}  // namespace fdpp::finetune
