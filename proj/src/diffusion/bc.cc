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

#include "fdpp/diffusion/bc.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fdpp/common/rng.h"
#include "fdpp/diffusion/sampler.h"
#include "fdpp/numgrad/adam.h"
#include "fdpp/numgrad/mlp.h"

namespace fdpp::diffusion {

std::pair<Normalizer, Normalizer> fit_normalizers(const std::vector<envs::Trajectory>& demos) {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> acts;
  for (const auto& d : demos) {
    for (const auto& s : d.states) obs.push_back(envs::observe(s));
    for (const auto& a : d.labels.empty() ? d.actions : d.labels) acts.push_back(a);
  }
  if (acts.empty()) throw std::invalid_argument("demonstrations contain no actions");
  return {Normalizer::fit(obs), Normalizer::fit(acts)};
}

WindowDataset make_windows(const DiffusionPolicy& policy,
                           const std::vector<envs::Trajectory>& demos) {
  std::size_t total = 0;
  for (const auto& d : demos) total += d.actions.size();
  WindowDataset data;
  data.cond.resize(policy.cond_dim(), static_cast<Eigen::Index>(total));
  data.actions.resize(policy.sample_dim(), static_cast<Eigen::Index>(total));
  const int ts = policy.horizons.obs_steps;
  const int tp = policy.horizons.pred_steps;
  const int a = policy.action_dim;
  Eigen::Index col = 0;
  for (const auto& d : demos) {
    const auto len = static_cast<int>(d.actions.size());
    std::vector<std::vector<double>> obs;
    for (int t = 0; t < len; ++t) obs.push_back(envs::observe(d.states[t]));
    std::vector<std::vector<double>> norm_actions;
    for (const auto& act : d.labels.empty() ? d.actions : d.labels) {
      norm_actions.push_back(policy.action_norm.normalize(act));
    }
    for (int t = 0; t < len; ++t, ++col) {
      const std::span<const std::vector<double>> history(obs.data(), t + 1);
      if (ts > 0) data.cond.col(col) = condition_from_states(policy, history);
      for (int j = 0; j < tp; ++j) {
        const auto& na = norm_actions[std::min(t + j, len - 1)];
        for (int i = 0; i < a; ++i) data.actions(j * a + i, col) = na[i];
      }
    }
  }
  return data;
}

LossAndGrad bc_loss(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                    const Eigen::MatrixXd& actions, std::uint64_t seed) {
  const Eigen::Index n = actions.cols();
  if (n == 0) throw std::invalid_argument("bc_loss: empty batch");
  if (actions.rows() != policy.sample_dim()) {
    throw std::invalid_argument("bc_loss: action windows have the wrong length");
  }
  const NoiseSchedule& s = policy.schedule;
  auto rng = make_rng(seed, /*stream=*/0xBC);
  std::uniform_int_distribution<int> pick_k(1, s.train_steps());
  std::normal_distribution<double> normal;

  std::vector<int> steps(n);
  Eigen::MatrixXd noise(actions.rows(), n);
  Eigen::MatrixXd noisy(actions.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    steps[c] = pick_k(rng);
    for (Eigen::Index r = 0; r < actions.rows(); ++r) noise(r, c) = normal(rng);
    const double ab = s.alpha_bar(steps[c]);
    noisy.col(c) = std::sqrt(ab) * actions.col(c) + std::sqrt(1.0 - ab) * noise.col(c);
  }

  numgrad::MlpTape tape;
  const Eigen::MatrixXd eps_hat = predict_noise(policy, noisy, cond, steps, &tape);
  const Eigen::MatrixXd diff = eps_hat - noise;
  const double scale = 1.0 / static_cast<double>(diff.size());
  LossAndGrad out;
  out.loss = diff.squaredNorm() * scale;
  if (!std::isfinite(out.loss)) throw std::runtime_error("bc_loss: non-finite loss");
  out.grads = policy.params.zeros_like();
  numgrad::backward_batch(policy.net, policy.params, tape, 2.0 * scale * diff, out.grads);
  return out;
}

double mean_form_loss(const NoiseSchedule& schedule, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& xk, int k, const Eigen::VectorXd& eps_hat) {
  const Eigen::VectorXd target = posterior_mean(schedule, x0, xk, k);
  const Eigen::VectorXd model =
      posterior_mean(schedule, predict_clean(schedule, xk, k, eps_hat), xk, k);
  return (target - model).squaredNorm();
}

nlohmann::ordered_json to_json(const BcConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"log_every", c.log_every}};
}

BcConfig bc_config_from_json(const nlohmann::ordered_json& j) {
  BcConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

std::vector<BcLogEntry> train_bc(DiffusionPolicy& policy, const WindowDataset& data,
                                 const BcConfig& config, const BcLogFn& log) {
  if (data.size() == 0) throw std::invalid_argument("train_bc: empty dataset");
  if (config.steps < 0 || config.batch_size < 1 || config.log_every < 1) {
    throw std::invalid_argument("train_bc: invalid step, batch or logging settings");
  }
  auto rng = make_rng(config.seed, /*stream=*/0xBC0);
  std::uniform_int_distribution<int> pick(0, data.size() - 1);
  numgrad::AdamState adam =
      numgrad::make_adam_state(policy.params, {.learning_rate = config.learning_rate});
  const int b = config.batch_size;
  Eigen::MatrixXd cond(data.cond.rows(), data.cond.rows() > 0 ? b : 0);
  Eigen::MatrixXd acts(data.actions.rows(), b);
  std::vector<BcLogEntry> curve;
  double running = 0.0;
  int since = 0;
  for (int step = 1; step <= config.steps; ++step) {
    for (int c = 0; c < b; ++c) {
      const int i = pick(rng);
      if (cond.rows() > 0) cond.col(c) = data.cond.col(i);
      acts.col(c) = data.actions.col(i);
    }
    LossAndGrad lg = bc_loss(policy, cond, acts, rng());
    numgrad::adam_step(policy.params, lg.grads, adam);
    running += lg.loss;
    ++since;
    if (step % config.log_every == 0 || step == config.steps) {
      curve.push_back({step, running / since});
      if (log) log(curve.back());
      running = 0.0;
      since = 0;
    }
  }
  return curve;
}

}  // namespace fdpp::diffusion
