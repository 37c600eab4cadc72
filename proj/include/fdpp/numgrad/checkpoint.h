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

#ifndef FDPP_NUMGRAD_CHECKPOINT_H_
#define FDPP_NUMGRAD_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "fdpp/numgrad/mlp.h"
#include "fdpp/numgrad/param_store.h"
#include "json.hpp"

namespace fdpp::numgrad {

struct MlpCheckpoint {
  MlpSpec spec;
  ParamStore params;
};

// {"spec": MlpSpec, "params": {...}}. Callers extend the object with their
// own metadata keys before writing.
nlohmann::ordered_json to_json(const MlpCheckpoint& checkpoint);
MlpCheckpoint mlp_checkpoint_from_json(const nlohmann::ordered_json& j);

// Reads/writes a whole JSON document; writes go through a temporary file and
// a rename so a crash never leaves a truncated checkpoint.
nlohmann::ordered_json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path,
                     const nlohmann::ordered_json& j);

}  // namespace fdpp::numgrad

#endif  // FDPP_NUMGRAD_CHECKPOINT_H_
