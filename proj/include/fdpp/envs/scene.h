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

#ifndef FDPP_ENVS_SCENE_H_
#define FDPP_ENVS_SCENE_H_

#include <string>
#include <vector>

#include "fdpp/envs/env.h"
#include "json.hpp"

namespace fdpp::envs {

enum class PrimitiveKind { kDisc, kOrientedRectangle, kRegion, kMarker };

std::string to_string(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_string(const std::string& name);

// One drawable. `position` is the center (disc, rectangle, marker) or the
// lower-left corner (region); `size` is (radius, radius) for discs and
// (width, height) otherwise; `angle` in radians.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kMarker;
  Vec2 position;
  Vec2 size;
  double angle = 0.0;
  std::string color;
  std::string label;
  bool operator==(const Primitive&) const = default;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  bool operator==(const SceneSpec&) const = default;
};

// push-block: workspace, forbidden_region (red), goal (green), pusher
// (blue), block (gray). place-align: workspace, target (green rectangle),
// block (red rectangle), plus a "released" marker once the block is let go.
SceneSpec render_scene(const State& state, const EnvConfig& config);

nlohmann::ordered_json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::ordered_json& j);

}  // namespace fdpp::envs

#endif  // FDPP_ENVS_SCENE_H_
