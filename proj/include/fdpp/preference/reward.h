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

#ifndef FDPP_PREFERENCE_REWARD_H_
#define FDPP_PREFERENCE_REWARD_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/diffusion/policy.h"
#include "fdpp/envs/env.h"
#include "fdpp/numgrad/mlp.h"
#include "fdpp/numgrad/param_store.h"
#include "fdpp/preference/records.h"
#include "json.hpp"

namespace fdpp::preference {

// Scalar reward of a single normalized observation.
struct RewardModel {
  numgrad::MlpSpec net;
  numgrad::ParamStore params;
  diffusion::Normalizer norm;
  envs::EnvId env = envs::EnvId::kPushBlock;
  envs::FeatureId feature = envs::FeatureId::kRegionOccupancy;

  double reward(const envs::State& state) const;
  // One reward per column of already-normalized observations.
  Eigen::VectorXd reward_batch(const Eigen::MatrixXd& normalized_obs) const;
  Eigen::MatrixXd normalize(std::span<const envs::State> states) const;
};

// p[b preferred over a] = exp(r_b) / (exp(r_a) + exp(r_b)), evaluated
// without overflow.
double pref_prob(double reward_a, double reward_b);
double pref_prob(const RewardModel& model, const envs::State& a, const envs::State& b);

// Normalized observations of labeled pairs, one column per pair.
struct PairBatch {
  Eigen::MatrixXd obs_a;
  Eigen::MatrixXd obs_b;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

PairBatch make_pair_batch(const RewardModel& model, const std::vector<PreferenceRecord>& records);

struct RewardLoss {
  double loss = 0.0;
  numgrad::ParamStore grads;
};

// Mean Bradley-Terry cross-entropy over the batch. Decisive labels use hard
// targets; kEqual uses the soft target (0.5, 0.5).
RewardLoss reward_loss(const RewardModel& model, const PairBatch& batch);

struct RewardConfig {
  std::vector<int> hidden_dims{128, 128};
  numgrad::Activation activation = numgrad::Activation::kTanh;
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const RewardConfig& config);
RewardConfig reward_config_from_json(const nlohmann::ordered_json& j);

struct RewardReport {
  int train_pairs = 0;
  int holdout_pairs = 0;
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

nlohmann::ordered_json to_json(const RewardReport& report);

// Fraction of decisive pairs whose preferred state receives the strictly
// higher reward.
double ranking_accuracy(const RewardModel& model, const std::vector<PreferenceRecord>& records);

// Labeled records are de-duplicated by pair_id (first wins), split 90/10 by a
// seeded shuffle of pair_ids and fitted with Adam for a fixed epoch budget.
// Throws std::invalid_argument with fewer than two decisive labels.
RewardModel train_reward(const std::vector<PreferenceRecord>& records, envs::FeatureId feature,
                         const RewardConfig& config, RewardReport* report = nullptr);

// Sum of per-state rewards over the states reached by one executed chunk.
// Throws std::invalid_argument unless exactly `expected_count` states are given.
double sequence_reward(const RewardModel& model, std::span<const envs::State> states,
                       int expected_count);

nlohmann::ordered_json to_json(const RewardModel& model);
RewardModel reward_model_from_json(const nlohmann::ordered_json& j);
void save_reward(const std::filesystem::path& path, const RewardModel& model,
                 const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
RewardModel load_reward(const std::filesystem::path& path);

}  // namespace fdpp::preference

#endif  // FDPP_PREFERENCE_REWARD_H_
