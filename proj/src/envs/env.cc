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

#include "fdpp/envs/env.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fdpp/common/rng.h"

namespace fdpp::envs {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kReleaseThreshold = 0.5;
constexpr double kPenetrationSlack = 1e-12;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
Vec2 clamp01(Vec2 p) { return {clamp01(p.x), clamp01(p.y)}; }

Vec2 sub(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 add(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 scale(Vec2 a, double s) { return {a.x * s, a.y * s}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

void require_action(std::span<const double> action, EnvId id) {
  if (static_cast<int>(action.size()) != action_dim(id)) {
    std::ostringstream msg;
    msg << to_string(id) << " expects " << action_dim(id) << " action components, got "
        << action.size();
    throw std::invalid_argument(msg.str());
  }
}

PushState step_push(const PushState& s, std::span<const double> action,
                    const EnvConfig& cfg) {
  const double contact = cfg.pusher_radius + cfg.block_radius;
  PushState next = s;
  ++next.t;
  const Vec2 move{clip_unit(action[0]) * cfg.max_translation,
                  clip_unit(action[1]) * cfg.max_translation};
  Vec2 p = clamp01(add(s.pusher, move));
  Vec2 b = s.block;
  Vec2 gap = sub(b, p);
  double d = norm(gap);
  if (d < contact) {
    // Quasi-static contact: the block slides along the contact normal until
    // it touches the pusher.
    Vec2 normal = d > 0.0 ? scale(gap, 1.0 / d) : Vec2{1.0, 0.0};
    if (d == 0.0 && norm(move) > 0.0) normal = scale(move, 1.0 / norm(move));
    b = clamp01(add(p, scale(normal, contact)));
    gap = sub(b, p);
    d = norm(gap);
    if (d < contact - kPenetrationSlack) {
      // The workspace wall stopped the block; the pusher yields instead.
      const Vec2 back = d > 0.0 ? scale(gap, -1.0 / d) : scale(normal, -1.0);
      p = clamp01(add(b, scale(back, contact)));
    }
  }
  next.pusher = p;
  next.block = b;
  return next;
}

PlaceState step_place(const PlaceState& s, std::span<const double> action,
                      const EnvConfig& cfg) {
  PlaceState next = s;
  ++next.t;
  if (clip_unit(action[3]) > kReleaseThreshold) {
    next.released = true;
    return next;
  }
  next.pose.x = clamp01(s.pose.x + clip_unit(action[0]) * cfg.max_translation);
  next.pose.y = clamp01(s.pose.y + clip_unit(action[1]) * cfg.max_translation);
  next.pose.phi = wrap_angle(s.pose.phi + clip_unit(action[2]) * cfg.max_rotation);
  return next;
}

// Scales `v` so its Euclidean norm is at most `limit`, keeping its direction.
Vec2 limit_norm(Vec2 v, double limit) {
  const double n = norm(v);
  return n > limit ? scale(v, limit / n) : v;
}

// Expert tuning, frozen after calibration against the success and
// region-occupancy properties checked in envs_test.
constexpr double kPushApproachGain = 0.12;
constexpr double kPushPhaseTolerance = 0.01;
constexpr double kPlaceGain = 1.0;

std::vector<double> push_expert(const PushState& s, const EnvConfig& cfg) {
  const Vec2 q = approach_point(s, cfg);
  const Vec2 to_goal = sub(cfg.goal, s.block);
  const double goal_dist = norm(to_goal);
  Vec2 command;
  if (distance(s.pusher, q) > kPushPhaseTolerance || goal_dist == 0.0) {
    command = scale(sub(q, s.pusher), kPushApproachGain / cfg.max_translation);
  } else {
    const Vec2 target = add(q, scale(to_goal, cfg.max_translation / goal_dist));
    command = scale(sub(target, s.pusher), 1.0 / cfg.max_translation);
  }
  command = limit_norm(command, 1.0);
  return {command.x, command.y};
}

std::vector<double> place_expert(const PlaceState& s, const EnvConfig& cfg,
                                 std::uint64_t episode_seed) {
  const PlaceExpertResiduals res = place_expert_residuals(episode_seed);
  const Vec2 to_target{s.target.x - s.pose.x, s.target.y - s.pose.y};
  const double dist = norm(to_target);
  const double angle_err = wrap_angle(s.pose.phi - s.target.phi);
  const double band = std::abs(res.angle_residual);
  constexpr double kAngleSlack = 1e-9;

  const bool position_done = dist <= res.release_radius;
  const bool angle_done = std::abs(angle_err) <= band + kAngleSlack;
  if (position_done && angle_done) return {0.0, 0.0, 0.0, 1.0};

  Vec2 move{0.0, 0.0};
  if (!position_done) {
    move = limit_norm(scale(to_target, kPlaceGain / cfg.max_translation), 1.0);
  }
  double turn = 0.0;
  if (!angle_done) {
    // Rotate toward the target, stopping on the edge of the residual band.
    const double excess = std::abs(angle_err) - band;
    turn = -std::copysign(std::min(1.0, excess / cfg.max_rotation), angle_err);
  }
  return {move.x, move.y, turn, -1.0};
}

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

std::string to_string(EnvId id) {
  return id == EnvId::kPushBlock ? "push-block" : "place-align";
}

EnvId env_id_from_string(const std::string& name) {
  if (name == "push-block" || name == "push-block-2d") return EnvId::kPushBlock;
  if (name == "place-align" || name == "place-align-2d") return EnvId::kPlaceAlign;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

void EnvConfig::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (max_translation <= 0.0 || max_rotation <= 0.0) {
    throw std::invalid_argument("per-step maxima must be positive");
  }
  if (pusher_radius <= 0.0 || block_radius <= 0.0) {
    throw std::invalid_argument("radii must be positive");
  }
  if (forbidden.x_min >= forbidden.x_max || forbidden.y_min >= forbidden.y_max) {
    throw std::invalid_argument("forbidden region is empty");
  }
  // Disjoint from the goal disc: distance from the goal to the box exceeds
  // the tolerance radius.
  const double dx = std::max({forbidden.x_min - goal.x, 0.0, goal.x - forbidden.x_max});
  const double dy = std::max({forbidden.y_min - goal.y, 0.0, goal.y - forbidden.y_max});
  if (std::hypot(dx, dy) <= goal_tolerance) {
    throw std::invalid_argument("forbidden region overlaps the goal disc");
  }
  if (goal_tolerance <= 0.0 || place_tolerance <= 0.0) {
    throw std::invalid_argument("success tolerances must be positive");
  }
  if (grace_steps < 0) throw std::invalid_argument("grace_steps must be >= 0");
}

EnvConfig default_config(EnvId id) {
  EnvConfig c;
  c.id = id;
  return c;
}

nlohmann::ordered_json to_json(const EnvConfig& c) {
  nlohmann::ordered_json j;
  j["env"] = to_string(c.id);
  j["max_steps"] = c.max_steps;
  j["seed"] = c.seed;
  j["max_translation"] = c.max_translation;
  j["max_rotation"] = c.max_rotation;
  j["pusher_radius"] = c.pusher_radius;
  j["block_radius"] = c.block_radius;
  j["goal"] = {c.goal.x, c.goal.y};
  j["forbidden"] = {c.forbidden.x_min, c.forbidden.x_max, c.forbidden.y_min,
                    c.forbidden.y_max};
  j["goal_tolerance"] = c.goal_tolerance;
  j["grace_steps"] = c.grace_steps;
  j["target"] = {c.target.x, c.target.y, c.target.phi};
  j["place_tolerance"] = c.place_tolerance;
  return j;
}

EnvConfig env_config_from_json(const nlohmann::ordered_json& j) {
  EnvConfig c = default_config(env_id_from_string(j.at("env").get<std::string>()));
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  c.max_translation = j.value("max_translation", c.max_translation);
  c.max_rotation = j.value("max_rotation", c.max_rotation);
  c.pusher_radius = j.value("pusher_radius", c.pusher_radius);
  c.block_radius = j.value("block_radius", c.block_radius);
  if (j.contains("goal")) c.goal = {j["goal"][0].get<double>(), j["goal"][1].get<double>()};
  if (j.contains("forbidden")) {
    const auto& f = j["forbidden"];
    c.forbidden = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>(),
                   f[3].get<double>()};
  }
  c.goal_tolerance = j.value("goal_tolerance", c.goal_tolerance);
  c.grace_steps = j.value("grace_steps", c.grace_steps);
  if (j.contains("target")) {
    const auto& t = j["target"];
    c.target = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  }
  c.place_tolerance = j.value("place_tolerance", c.place_tolerance);
  c.validate();
  return c;
}

int action_dim(EnvId id) { return id == EnvId::kPushBlock ? 2 : 4; }
int observation_dim(EnvId /*id*/) { return 4; }

EnvId env_of(const State& state) {
  return std::holds_alternative<PushState>(state) ? EnvId::kPushBlock : EnvId::kPlaceAlign;
}

int time_of(const State& state) {
  return std::visit([](const auto& s) { return s.t; }, state);
}

std::vector<double> observe(const State& state) {
  if (const auto* s = std::get_if<PushState>(&state)) {
    return {s->pusher.x, s->pusher.y, s->block.x, s->block.y};
  }
  const auto& s = std::get<PlaceState>(state);
  return {s.pose.x, s.pose.y, std::sin(s.pose.phi), std::cos(s.pose.phi)};
}

nlohmann::ordered_json to_json(const State& state) {
  nlohmann::ordered_json j;
  if (const auto* s = std::get_if<PushState>(&state)) {
    j["pusher"] = {s->pusher.x, s->pusher.y};
    j["block"] = {s->block.x, s->block.y};
    j["t"] = s->t;
    return j;
  }
  const auto& s = std::get<PlaceState>(state);
  j["pose"] = {s.pose.x, s.pose.y, s.pose.phi};
  j["target"] = {s.target.x, s.target.y, s.target.phi};
  j["released"] = s.released;
  j["t"] = s.t;
  return j;
}

State state_from_json(const nlohmann::ordered_json& j) {
  if (j.contains("pusher")) {
    PushState s;
    s.pusher = {j["pusher"][0].get<double>(), j["pusher"][1].get<double>()};
    s.block = {j.at("block")[0].get<double>(), j.at("block")[1].get<double>()};
    s.t = j.at("t").get<int>();
    return s;
  }
  PlaceState s;
  const auto& p = j.at("pose");
  const auto& t = j.at("target");
  s.pose = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
  s.target = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  s.released = j.at("released").get<bool>();
  s.t = j.at("t").get<int>();
  return s;
}

State reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  auto rng = make_rng(seed, /*stream=*/0x5E5E7);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (config.id == EnvId::kPushBlock) {
    PushState s;
    s.pusher = {0.80 + 0.15 * u01(rng), 0.05 + 0.15 * u01(rng)};
    s.block = {0.45 + 0.10 * u01(rng), 0.45 + 0.10 * u01(rng)};
    return s;
  }
  PlaceState s;
  // Uniform over the annulus area.
  const double r = std::sqrt(0.25 * 0.25 + u01(rng) * (0.4 * 0.4 - 0.25 * 0.25));
  const double theta = -kPi + 2.0 * kPi * u01(rng);
  s.pose = {0.5 + r * std::cos(theta), 0.5 + r * std::sin(theta),
            wrap_angle(kPi - 2.0 * kPi * u01(rng))};
  s.target = config.target;
  return s;
}

bool success(const State& state, const EnvConfig& config) {
  if (const auto* s = std::get_if<PushState>(&state)) {
    return distance(s->block, config.goal) <= config.goal_tolerance;
  }
  const auto& s = std::get<PlaceState>(state);
  return s.released && std::hypot(s.pose.x - s.target.x, s.pose.y - s.target.y) <=
                           config.place_tolerance;
}

bool is_terminal(const State& state, const EnvConfig& config) {
  if (time_of(state) >= config.max_steps) return true;
  if (const auto* s = std::get_if<PlaceState>(&state)) return s->released;
  return success(state, config);
}

std::string to_string(FeatureId id) {
  switch (id) {
    case FeatureId::kRegionOccupancy: return "region_occupancy";
    case FeatureId::kDisplacement: return "displacement";
    case FeatureId::kMisalignment: return "misalignment";
  }
  return "?";
}

FeatureId feature_id_from_string(const std::string& name) {
  if (name == "region_occupancy" || name == "region") return FeatureId::kRegionOccupancy;
  if (name == "displacement" || name == "dist") return FeatureId::kDisplacement;
  if (name == "misalignment" || name == "align") return FeatureId::kMisalignment;
  throw std::invalid_argument("unknown feature '" + name + "'");
}

bool feature_applies(FeatureId feature, EnvId env) {
  return (feature == FeatureId::kRegionOccupancy) == (env == EnvId::kPushBlock);
}

double feature(const State& state, FeatureId feature_id, const EnvConfig& config) {
  if (!feature_applies(feature_id, env_of(state))) {
    throw std::invalid_argument("feature " + to_string(feature_id) +
                                " is not defined for " + to_string(env_of(state)));
  }
  if (const auto* s = std::get_if<PushState>(&state)) {
    return config.forbidden.contains(s->pusher) ? 1.0 : 0.0;
  }
  const auto& s = std::get<PlaceState>(state);
  if (feature_id == FeatureId::kDisplacement) {
    return std::hypot(s.pose.x - s.target.x, s.pose.y - s.target.y);
  }
  return std::abs(wrap_angle(s.pose.phi - s.target.phi));
}

std::map<std::string, double> all_features(const State& state, const EnvConfig& config) {
  std::map<std::string, double> out;
  for (FeatureId f : {FeatureId::kRegionOccupancy, FeatureId::kDisplacement,
                      FeatureId::kMisalignment}) {
    if (feature_applies(f, env_of(state))) out[to_string(f)] = feature(state, f, config);
  }
  return out;
}

StepResult step(const State& state, std::span<const double> action,
                const EnvConfig& config) {
  if (is_terminal(state, config)) {
    throw std::logic_error("step called on a terminal state");
  }
  require_action(action, env_of(state));
  StepResult out;
  if (const auto* s = std::get_if<PushState>(&state)) {
    out.state = step_push(*s, action, config);
  } else {
    out.state = step_place(std::get<PlaceState>(state), action, config);
  }
  out.success = success(out.state, config);
  out.done = is_terminal(out.state, config);
  return out;
}

Vec2 approach_point(const PushState& s, const EnvConfig& config) {
  const Vec2 away = sub(s.block, config.goal);
  const double n = norm(away);
  const double contact = config.pusher_radius + config.block_radius;
  if (n == 0.0) return s.block;
  return add(s.block, scale(away, contact / n));
}

PlaceExpertResiduals place_expert_residuals(std::uint64_t episode_seed) {
  auto rng = make_rng(episode_seed, /*stream=*/0xE4E47);
  std::normal_distribution<double> radius(0.06, 0.02);
  std::uniform_real_distribution<double> angle(-0.6, 0.6);
  PlaceExpertResiduals r;
  r.release_radius = std::abs(radius(rng));
  r.angle_residual = angle(rng);
  return r;
}

std::vector<double> scripted_expert(const State& state, const EnvConfig& config,
                                    std::uint64_t episode_seed) {
  if (const auto* s = std::get_if<PushState>(&state)) return push_expert(*s, config);
  return place_expert(std::get<PlaceState>(state), config, episode_seed);
}

}  // namespace fdpp::envs
