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

#include "fdpp/preference/reward.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include "fdpp/common/rng.h"
#include "fdpp/numgrad/adam.h"
#include "fdpp/numgrad/checkpoint.h"

namespace fdpp::preference {
namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double target_of(int label) {
  switch (label) {
    case kPreferA:
      return 0.0;
    case kPreferB:
      return 1.0;
    default:
      return 0.5;
  }
}

bool decisive(const PreferenceRecord& r) { return r.label && *r.label != kEqual; }

}  // namespace

Eigen::MatrixXd RewardModel::normalize(std::span<const envs::State> states) const {
  Eigen::MatrixXd x(norm.dim(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t c = 0; c < states.size(); ++c) {
    if (envs::env_of(states[c]) != env) {
      throw std::invalid_argument("reward model for " + envs::to_string(env) +
                                  " applied to a " + envs::to_string(envs::env_of(states[c])) +
                                  " state");
    }
    const std::vector<double> z = norm.normalize(envs::observe(states[c]));
    for (int r = 0; r < norm.dim(); ++r) x(r, static_cast<Eigen::Index>(c)) = z[r];
  }
  return x;
}

Eigen::VectorXd RewardModel::reward_batch(const Eigen::MatrixXd& normalized_obs) const {
  return numgrad::forward_batch(net, params, normalized_obs).row(0).transpose();
}

double RewardModel::reward(const envs::State& state) const {
  const envs::State one[] = {state};
  return reward_batch(normalize(one))(0);
}

double pref_prob(double reward_a, double reward_b) {
  const double d = reward_b - reward_a;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

double pref_prob(const RewardModel& model, const envs::State& a, const envs::State& b) {
  return pref_prob(model.reward(a), model.reward(b));
}

PairBatch make_pair_batch(const RewardModel& model, const std::vector<PreferenceRecord>& records) {
  std::vector<envs::State> a;
  std::vector<envs::State> b;
  PairBatch batch;
  for (const auto& r : records) {
    if (!r.label) continue;
    a.push_back(r.state_a);
    b.push_back(r.state_b);
    batch.labels.push_back(*r.label);
  }
  batch.obs_a = model.normalize(a);
  batch.obs_b = model.normalize(b);
  return batch;
}

RewardLoss reward_loss(const RewardModel& model, const PairBatch& batch) {
  const int n = batch.size();
  if (n == 0) throw std::invalid_argument("reward_loss: empty batch");
  Eigen::MatrixXd x(batch.obs_a.rows(), 2 * n);
  x.leftCols(n) = batch.obs_a;
  x.rightCols(n) = batch.obs_b;
  numgrad::MlpTape tape;
  const Eigen::MatrixXd r = numgrad::forward_batch(model.net, model.params, x, &tape);
  Eigen::MatrixXd dr(1, 2 * n);
  RewardLoss out;
  for (int i = 0; i < n; ++i) {
    const double d = r(0, n + i) - r(0, i);
    const double t = target_of(batch.labels[i]);
    out.loss += t * softplus(-d) + (1.0 - t) * softplus(d);
    const double g = (pref_prob(r(0, i), r(0, n + i)) - t) / n;
    dr(0, i) = -g;
    dr(0, n + i) = g;
  }
  out.loss /= n;
  if (!std::isfinite(out.loss)) throw std::runtime_error("reward_loss: non-finite loss");
  out.grads = model.params.zeros_like();
  numgrad::backward_batch(model.net, model.params, tape, dr, out.grads);
  return out;
}

nlohmann::ordered_json to_json(const RewardConfig& c) {
  return {{"hidden_dims", c.hidden_dims},
          {"activation", numgrad::to_string(c.activation)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"holdout_fraction", c.holdout_fraction},
          {"seed", c.seed}};
}

RewardConfig reward_config_from_json(const nlohmann::ordered_json& j) {
  RewardConfig c;
  c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
  if (j.contains("activation")) {
    c.activation = numgrad::activation_from_string(j.at("activation").get<std::string>());
  }
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::ordered_json to_json(const RewardReport& r) {
  const auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
  };
  return {{"train_pairs", r.train_pairs},
          {"holdout_pairs", r.holdout_pairs},
          {"train_accuracy", num(r.train_accuracy)},
          {"holdout_accuracy", num(r.holdout_accuracy)},
          {"final_loss", r.final_loss},
          {"epoch_loss", r.epoch_loss}};
}

double ranking_accuracy(const RewardModel& model, const std::vector<PreferenceRecord>& records) {
  std::vector<PreferenceRecord> pairs;
  for (const auto& r : records) {
    if (decisive(r)) pairs.push_back(r);
  }
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const PairBatch batch = make_pair_batch(model, pairs);
  const Eigen::VectorXd ra = model.reward_batch(batch.obs_a);
  const Eigen::VectorXd rb = model.reward_batch(batch.obs_b);
  int correct = 0;
  for (int i = 0; i < batch.size(); ++i) {
    if (batch.labels[i] == kPreferB ? rb(i) > ra(i) : ra(i) > rb(i)) ++correct;
  }
  return static_cast<double>(correct) / batch.size();
}

RewardModel train_reward(const std::vector<PreferenceRecord>& records, envs::FeatureId feature,
                         const RewardConfig& config, RewardReport* report) {
  if (config.epochs < 0 || config.batch_size < 1 ||
      !(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw std::invalid_argument("train_reward: invalid epoch, batch or holdout settings");
  }
  std::map<std::int64_t, const PreferenceRecord*> by_id;
  for (const auto& r : records) {
    if (r.label) by_id.emplace(r.pair_id, &r);
  }
  int n_decisive = 0;
  for (const auto& [id, r] : by_id) n_decisive += decisive(*r) ? 1 : 0;
  if (n_decisive < 2) {
    throw std::invalid_argument("train_reward: need at least two decisive labels, got " +
                                std::to_string(n_decisive));
  }
  const envs::EnvId env = envs::env_of(by_id.begin()->second->state_a);
  if (!envs::feature_applies(feature, env)) {
    throw std::invalid_argument("feature " + envs::to_string(feature) + " does not apply to " +
                                envs::to_string(env));
  }

  std::vector<std::int64_t> ids;
  for (const auto& [id, r] : by_id) ids.push_back(id);
  auto rng = make_rng(config.seed, /*stream=*/0x4E3A);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_holdout = static_cast<std::size_t>(config.holdout_fraction * ids.size());
  std::vector<PreferenceRecord> holdout;
  std::vector<PreferenceRecord> train;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (i < n_holdout ? holdout : train).push_back(*by_id.at(ids[i]));
  }

  std::vector<std::vector<double>> observed;
  for (const auto& [id, r] : by_id) {
    observed.push_back(envs::observe(r->state_a));
    observed.push_back(envs::observe(r->state_b));
  }
  RewardModel model;
  model.env = env;
  model.feature = feature;
  model.norm = diffusion::Normalizer::fit(observed);
  model.net = numgrad::MlpSpec{model.norm.dim(), config.hidden_dims, 1, config.activation};
  model.params = numgrad::init_params(model.net, rng, /*zero_final_layer=*/false);

  const PairBatch all_train = make_pair_batch(model, train);
  numgrad::AdamState adam =
      numgrad::make_adam_state(model.params, {.learning_rate = config.learning_rate});
  std::vector<int> order(all_train.size());
  std::vector<double> epoch_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = 0; i < all_train.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (int start = 0; start < all_train.size(); start += config.batch_size) {
      const int m = std::min(config.batch_size, all_train.size() - start);
      PairBatch mb;
      mb.obs_a.resize(all_train.obs_a.rows(), m);
      mb.obs_b.resize(all_train.obs_b.rows(), m);
      for (int j = 0; j < m; ++j) {
        const int src = order[start + j];
        mb.obs_a.col(j) = all_train.obs_a.col(src);
        mb.obs_b.col(j) = all_train.obs_b.col(src);
        mb.labels.push_back(all_train.labels[src]);
      }
      RewardLoss lg = reward_loss(model, mb);
      numgrad::adam_step(model.params, lg.grads, adam);
      total += lg.loss * m;
    }
    epoch_loss.push_back(total / all_train.size());
  }

  if (report != nullptr) {
    report->train_pairs = static_cast<int>(train.size());
    report->holdout_pairs = static_cast<int>(holdout.size());
    report->train_accuracy = ranking_accuracy(model, train);
    report->holdout_accuracy = ranking_accuracy(model, holdout);
    report->final_loss = reward_loss(model, all_train).loss;
    report->epoch_loss = std::move(epoch_loss);
  }
  return model;
}

double sequence_reward(const RewardModel& model, std::span<const envs::State> states,
                       int expected_count) {
  if (static_cast<int>(states.size()) != expected_count) {
    throw std::invalid_argument("sequence_reward: expected " + std::to_string(expected_count) +
                                " states, got " + std::to_string(states.size()));
  }
  return model.reward_batch(model.normalize(states)).sum();
}

nlohmann::ordered_json to_json(const RewardModel& model) {
  nlohmann::ordered_json j = numgrad::to_json(numgrad::MlpCheckpoint{model.net, model.params});
  j["norm"] = diffusion::to_json(model.norm);
  j["feature_id"] = envs::to_string(model.feature);
  j["env"] = envs::to_string(model.env);
  return j;
}

RewardModel reward_model_from_json(const nlohmann::ordered_json& j) {
  numgrad::MlpCheckpoint ckpt = numgrad::mlp_checkpoint_from_json(j);
  RewardModel m;
  m.net = ckpt.spec;
  m.params = std::move(ckpt.params);
  m.norm = diffusion::normalizer_from_json(j.at("norm"));
  m.feature = envs::feature_id_from_string(j.at("feature_id").get<std::string>());
  m.env = envs::env_id_from_string(j.at("env").get<std::string>());
  if (m.net.output_dim != 1 || m.net.input_dim != m.norm.dim()) {
    throw std::invalid_argument("reward checkpoint dims are inconsistent");
  }
  numgrad::validate_params(m.net, m.params);
  return m;
}

void save_reward(const std::filesystem::path& path, const RewardModel& model,
                 const nlohmann::ordered_json& metadata) {
  nlohmann::ordered_json j = to_json(model);
  for (const auto& [k, v] : metadata.items()) j[k] = v;
  numgrad::write_json_file(path, j);
}

RewardModel load_reward(const std::filesystem::path& path) {
  try {
    return reward_model_from_json(numgrad::read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid reward checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace fdpp::preference
