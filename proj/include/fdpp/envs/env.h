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

#ifndef FDPP_ENVS_ENV_H_
#define FDPP_ENVS_ENV_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace fdpp::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

struct Box {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  bool operator==(const Box&) const = default;
};

struct Pose {
  double x = 0.0, y = 0.0, phi = 0.0;
  bool operator==(const Pose&) const = default;
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

enum class EnvId { kPushBlock, kPlaceAlign };

std::string to_string(EnvId id);
EnvId env_id_from_string(const std::string& name);

struct EnvConfig {
  EnvId id = EnvId::kPushBlock;
  int max_steps = 200;
  std::uint64_t seed = 0;
  double max_translation = 0.02;  // per action component, workspace units
  double max_rotation = 0.1;      // rad

  // push-block
  double pusher_radius = 0.03;
  double block_radius = 0.06;
  Vec2 goal{0.15, 0.85};
  Box forbidden{0.55, 0.95, 0.05, 0.45};
  double goal_tolerance = 0.05;
  // Steps at the start of an episode during which region occupancy does not
  // count against the constraint (the pusher starts inside the region).
  int grace_steps = 25;

  // place-align
  Pose target{0.5, 0.5, 0.0};
  double place_tolerance = 0.10;

  // Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

EnvConfig default_config(EnvId id);
nlohmann::ordered_json to_json(const EnvConfig& config);
EnvConfig env_config_from_json(const nlohmann::ordered_json& j);

struct PushState {
  Vec2 pusher;
  Vec2 block;
  int t = 0;
  bool operator==(const PushState&) const = default;
};

struct PlaceState {
  Pose pose;
  Pose target;
  bool released = false;
  int t = 0;
  bool operator==(const PlaceState&) const = default;
};

using State = std::variant<PushState, PlaceState>;

int action_dim(EnvId id);
int observation_dim(EnvId id);
EnvId env_of(const State& state);
int time_of(const State& state);

// Low-dimensional policy/reward input: push-block (pusher, block),
// place-align (x, y, sin phi, cos phi).
std::vector<double> observe(const State& state);

nlohmann::ordered_json to_json(const State& state);
State state_from_json(const nlohmann::ordered_json& j);

// Initial state; a pure function of (config, seed).
State reset(const EnvConfig& config, std::uint64_t seed);

bool success(const State& state, const EnvConfig& config);
bool is_terminal(const State& state, const EnvConfig& config);

enum class FeatureId { kRegionOccupancy, kDisplacement, kMisalignment };

std::string to_string(FeatureId id);
FeatureId feature_id_from_string(const std::string& name);
bool feature_applies(FeatureId feature, EnvId env);
// Throws std::invalid_argument when the feature does not belong to the env.
double feature(const State& state, FeatureId feature_id, const EnvConfig& config);
std::map<std::string, double> all_features(const State& state, const EnvConfig& config);

struct StepResult {
  State state;
  bool done = false;
  bool success = false;
};

// Components are clipped to [-1, 1] and scaled by the per-env maximum.
// Throws std::logic_error when `state` is already terminal and
// std::invalid_argument on a wrong action length.
StepResult step(const State& state, std::span<const double> action,
                const EnvConfig& config);

// Deterministic given (state, episode_seed); per-episode residuals of the
// place-align expert are derived from the episode seed.
std::vector<double> scripted_expert(const State& state, const EnvConfig& config,
                                    std::uint64_t episode_seed);

struct PlaceExpertResiduals {
  double release_radius = 0.0;
  double angle_residual = 0.0;
};
PlaceExpertResiduals place_expert_residuals(std::uint64_t episode_seed);

// Push-block approach point: behind the block on the goal line, at contact
// distance.
Vec2 approach_point(const PushState& state, const EnvConfig& config);

}  // namespace fdpp::envs

#endif  // FDPP_ENVS_ENV_H_
