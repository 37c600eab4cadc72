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

#include "fdpp/envs/scene.h"

#include <stdexcept>

namespace fdpp::envs {
namespace {

constexpr double kBlockSide = 0.08;
constexpr double kMarkerSize = 0.02;

}  // namespace

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kDisc: return "disc";
    case PrimitiveKind::kOrientedRectangle: return "oriented-rectangle";
    case PrimitiveKind::kRegion: return "region";
    case PrimitiveKind::kMarker: return "marker";
  }
  return "?";
}

PrimitiveKind primitive_kind_from_string(const std::string& name) {
  if (name == "disc") return PrimitiveKind::kDisc;
  if (name == "oriented-rectangle") return PrimitiveKind::kOrientedRectangle;
  if (name == "region") return PrimitiveKind::kRegion;
  if (name == "marker") return PrimitiveKind::kMarker;
  throw std::invalid_argument("unknown primitive kind '" + name + "'");
}

SceneSpec render_scene(const State& state, const EnvConfig& config) {
  SceneSpec scene;
  auto& out = scene.primitives;
  out.push_back({PrimitiveKind::kRegion, {0.0, 0.0}, {1.0, 1.0}, 0.0, "black", "workspace"});
  if (const auto* s = std::get_if<PushState>(&state)) {
    const Box& r = config.forbidden;
    out.push_back({PrimitiveKind::kRegion, {r.x_min, r.y_min},
                   {r.x_max - r.x_min, r.y_max - r.y_min}, 0.0, "red", "forbidden_region"});
    out.push_back({PrimitiveKind::kDisc, config.goal,
                   {config.goal_tolerance, config.goal_tolerance}, 0.0, "green", "goal"});
    out.push_back({PrimitiveKind::kDisc, s->pusher,
                   {config.pusher_radius, config.pusher_radius}, 0.0, "blue", "pusher"});
    out.push_back({PrimitiveKind::kDisc, s->block,
                   {config.block_radius, config.block_radius}, 0.0, "gray", "block"});
    return scene;
  }
  const auto& s = std::get<PlaceState>(state);
  out.push_back({PrimitiveKind::kOrientedRectangle, {s.target.x, s.target.y},
                 {kBlockSide, kBlockSide}, s.target.phi, "green", "target"});
  out.push_back({PrimitiveKind::kOrientedRectangle, {s.pose.x, s.pose.y},
                 {kBlockSide, kBlockSide}, s.pose.phi, "red", "block"});
  if (s.released) {
    out.push_back({PrimitiveKind::kMarker, {s.pose.x, s.pose.y},
                   {kMarkerSize, kMarkerSize}, 0.0, "black", "released"});
  }
  return scene;
}

nlohmann::ordered_json to_json(const SceneSpec& scene) {
  nlohmann::ordered_json prims = nlohmann::ordered_json::array();
  for (const auto& p : scene.primitives) {
    prims.push_back({{"kind", to_string(p.kind)},
                     {"position", {p.position.x, p.position.y}},
                     {"size", {p.size.x, p.size.y}},
                     {"angle", p.angle},
                     {"color", p.color},
                     {"label", p.label}});
  }
  return {{"primitives", prims}};
}

SceneSpec scene_from_json(const nlohmann::ordered_json& j) {
  SceneSpec scene;
  for (const auto& p : j.at("primitives")) {
    Primitive prim;
    prim.kind = primitive_kind_from_string(p.at("kind").get<std::string>());
    prim.position = {p.at("position")[0].get<double>(), p.at("position")[1].get<double>()};
    prim.size = {p.at("size")[0].get<double>(), p.at("size")[1].get<double>()};
    prim.angle = p.at("angle").get<double>();
    prim.color = p.at("color").get<std::string>();
    prim.label = p.at("label").get<std::string>();
    scene.primitives.push_back(std::move(prim));
  }
  return scene;
}

}  // namespace fdpp::envs
