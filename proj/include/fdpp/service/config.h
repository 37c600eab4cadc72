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

#ifndef FDPP_SERVICE_CONFIG_H_
#define FDPP_SERVICE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "fdpp/diffusion/bc.h"
#include "fdpp/diffusion/policy.h"
#include "fdpp/envs/env.h"
#include "fdpp/finetune/ppo.h"
#include "fdpp/preference/reward.h"
#include "json.hpp"

namespace fdpp::service {

// Everything one pipeline run depends on. Stage seeds inside the nested
// configs are ignored; they are derived from `seed`.
struct RunConfig {
  envs::EnvConfig env;
  diffusion::PolicyConfig policy;
  diffusion::BcConfig bc;
  int demos = 200;
  double demo_noise = 0.3;  // executed-action noise of the scripted demos
  int rollouts = 100;       // episodes sampled for preference pairs
  envs::FeatureId feature = envs::FeatureId::kRegionOccupancy;
  int pairs = 1024;
  preference::RewardConfig reward;
  finetune::FinetuneConfig finetune;
  int eval_episodes = 100;
  std::filesystem::path workspace = "ws";
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when any part is inconsistent.
  void validate() const;
};

// Default feature: region occupancy for push-block, displacement for
// place-align.
RunConfig default_run_config(envs::EnvId env);

nlohmann::ordered_json to_json(const RunConfig& config);
// Starts from the defaults of j["env"]["env"]; missing keys keep them.
RunConfig run_config_from_json(const nlohmann::ordered_json& j);

// Lower-case hex SHA-256 of the compact config JSON, excluding the workspace
// path so that relocated runs hash identically.
std::string config_hash(const RunConfig& config);
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

enum class Stage : std::uint64_t {
  kDemos = 1,
  kPolicyInit,
  kBc,
  kRollouts,
  kPairs,
  kReward,
  kFinetune,
  kEval,
};

std::uint64_t stage_seed(const RunConfig& config, Stage stage);

// {"config_hash", "seed", "config"} block embedded in every artifact.
nlohmann::ordered_json artifact_meta(const RunConfig& config);

}  // namespace fdpp::service

#endif  // FDPP_SERVICE_CONFIG_H_
