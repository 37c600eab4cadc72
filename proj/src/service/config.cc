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

#include "fdpp/service/config.h"

#include <array>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <openssl/evp.h>

#include "fdpp/common/rng.h"

namespace fdpp::service {

void RunConfig::validate() const {
  env.validate();
  policy.horizons.validate();
  diffusion::NoiseSchedule::make(policy.schedule);
  finetune.validate();
  if (!envs::feature_applies(feature, env.id)) {
    throw std::invalid_argument("feature " + envs::to_string(feature) + " does not apply to " +
                                envs::to_string(env.id));
  }
  if (demos < 1 || rollouts < 1 || pairs < 1 || eval_episodes < 1) {
    throw std::invalid_argument("demos, rollouts, pairs and eval_episodes must be positive");
  }
  if (!(demo_noise >= 0.0)) throw std::invalid_argument("demo_noise must be >= 0");
  if (bc.steps < 0 || bc.batch_size < 1 || !(bc.learning_rate > 0.0)) {
    throw std::invalid_argument("invalid bc settings");
  }
  if (workspace.empty()) throw std::invalid_argument("workspace path is empty");
}

RunConfig default_run_config(envs::EnvId env) {
  RunConfig c;
  c.env = envs::default_config(env);
  c.feature = env == envs::EnvId::kPushBlock ? envs::FeatureId::kRegionOccupancy
                                             : envs::FeatureId::kDisplacement;
  return c;
}

namespace {

nlohmann::ordered_json without_seed(nlohmann::ordered_json j) {
  j.erase("seed");
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& c) {
  return {{"env", without_seed(envs::to_json(c.env))},
          {"policy", diffusion::to_json(c.policy)},
          {"bc", without_seed(diffusion::to_json(c.bc))},
          {"demos", c.demos},
          {"demo_noise", c.demo_noise},
          {"rollouts", c.rollouts},
          {"feature_id", envs::to_string(c.feature)},
          {"pairs", c.pairs},
          {"reward", without_seed(preference::to_json(c.reward))},
          {"finetune", without_seed(finetune::to_json(c.finetune))},
          {"eval_episodes", c.eval_episodes},
          {"workspace", c.workspace.string()},
          {"seed", c.seed}};
}

RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  const envs::EnvId env = j.contains("env")
                              ? envs::env_id_from_string(j.at("env").at("env").get<std::string>())
                              : envs::EnvId::kPushBlock;
  RunConfig c = default_run_config(env);
  if (j.contains("env")) c.env = envs::env_config_from_json(j.at("env"));
  if (j.contains("policy")) c.policy = diffusion::policy_config_from_json(j.at("policy"));
  if (j.contains("bc")) c.bc = diffusion::bc_config_from_json(j.at("bc"));
  c.demos = j.value("demos", c.demos);
  c.demo_noise = j.value("demo_noise", c.demo_noise);
  c.rollouts = j.value("rollouts", c.rollouts);
  if (j.contains("feature_id")) {
    c.feature = envs::feature_id_from_string(j.at("feature_id").get<std::string>());
  }
  c.pairs = j.value("pairs", c.pairs);
  if (j.contains("reward")) c.reward = preference::reward_config_from_json(j.at("reward"));
  if (j.contains("finetune")) c.finetune = finetune::finetune_config_from_json(j.at("finetune"));
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  if (j.contains("workspace")) c.workspace = j.at("workspace").get<std::string>();
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string config_hash(const RunConfig& config) {
  nlohmann::ordered_json j = to_json(config);
  j.erase("workspace");
  return sha256_hex(j.dump());
}

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stage));
}

nlohmann::ordered_json artifact_meta(const RunConfig& config) {
  nlohmann::ordered_json config_json = to_json(config);
  config_json.erase("workspace");
  return {{"config_hash", config_hash(config)}, {"seed", config.seed}, {"config", config_json}};
}

}  // namespace fdpp::service
