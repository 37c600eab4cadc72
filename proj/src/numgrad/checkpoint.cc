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

#include "fdpp/numgrad/checkpoint.h"

#include <fstream>
#include <stdexcept>

namespace fdpp::numgrad {

nlohmann::ordered_json to_json(const MlpCheckpoint& checkpoint) {
  validate_params(checkpoint.spec, checkpoint.params);
  nlohmann::ordered_json j;
  j["spec"] = to_json(checkpoint.spec);
  j["params"] = to_json(checkpoint.params);
  return j;
}

MlpCheckpoint mlp_checkpoint_from_json(const nlohmann::ordered_json& j) {
  MlpCheckpoint ckpt{mlp_spec_from_json(j.at("spec")),
                     param_store_from_json(j.at("params"))};
  validate_params(ckpt.spec, ckpt.params);
  return ckpt;
}

nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::ordered_json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump() << "\n";
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fdpp::numgrad
