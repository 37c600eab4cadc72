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

#include "fdpp/finetune/ppo.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fdpp/common/rng.h"
#include "fdpp/diffusion/sampler.h"

namespace fdpp::finetune {
namespace {

// Recorded inputs of a set of steps, gathered column-wise.
struct Gathered {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
  Eigen::MatrixXd ref_means;
  Eigen::MatrixXd cond;
  std::vector<int> k_from;
  Eigen::VectorXd input_coeff;
  Eigen::VectorXd noise_coeff;
  Eigen::VectorXd stdev;
  Eigen::VectorXd old_log_prob;
};

Gathered gather(const diffusion::DiffusionPolicy& policy, const RolloutBatch& batch,
                std::span<const StepRef> steps) {
  const diffusion::BatchTrace& tr = batch.traces;
  const auto m = static_cast<Eigen::Index>(steps.size());
  const int d = policy.sample_dim();
  std::vector<diffusion::StepCoefficients> coeffs;
  for (const auto& [from, to] : tr.transitions) {
    coeffs.push_back(diffusion::step_coefficients(policy.schedule, from, to));
  }
  Gathered g;
  g.inputs.resize(d, m);
  g.outputs.resize(d, m);
  g.ref_means.resize(d, m);
  g.cond.resize(policy.cond_dim(), policy.cond_dim() > 0 ? m : 0);
  g.input_coeff.resize(m);
  g.noise_coeff.resize(m);
  g.stdev.resize(m);
  g.old_log_prob.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const StepRef s = steps[j];
    if (s.point < 0 || s.point >= batch.size() || s.step < 0 ||
        s.step >= static_cast<int>(tr.transitions.size())) {
      throw std::out_of_range("step reference outside the rollout batch");
    }
    g.inputs.col(j) = tr.inputs[s.step].col(s.point);
    g.outputs.col(j) = tr.outputs[s.step].col(s.point);
    g.ref_means.col(j) = tr.ref_means[s.step].col(s.point);
    if (g.cond.rows() > 0) g.cond.col(j) = tr.cond.col(s.point);
    g.k_from.push_back(coeffs[s.step].k_from);
    g.input_coeff(j) = coeffs[s.step].input_coeff;
    g.noise_coeff(j) = coeffs[s.step].noise_coeff;
    g.stdev(j) = coeffs[s.step].stdev;
    if (!(g.stdev(j) > 0.0)) {
      throw std::invalid_argument("fine-tuning needs stochastic reverse steps (eta > 0)");
    }
    g.old_log_prob(j) = tr.log_probs[s.step](s.point);
  }
  return g;
}

Eigen::MatrixXd means_of(const Gathered& g, const Eigen::MatrixXd& eps) {
  return g.inputs * g.input_coeff.asDiagonal() + eps * g.noise_coeff.asDiagonal();
}

Eigen::VectorXd log_probs_of(const Gathered& g, const Eigen::MatrixXd& mean) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd out(mean.cols());
  for (Eigen::Index j = 0; j < mean.cols(); ++j) {
    const double s = g.stdev(j);
    out(j) = -0.5 * ((g.outputs.col(j) - mean.col(j)) / s).squaredNorm() -
             static_cast<double>(mean.rows()) * (std::log(s) + half_log_2pi);
  }
  return out;
}

}  // namespace

void FinetuneConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("clip must lie in (0, 1)");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (epochs < 1 || minibatch < 1 || episodes < 1 || iterations < 0) {
    throw std::invalid_argument("epochs, minibatch and episodes must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
  if (!(stdev_floor >= 0.0)) throw std::invalid_argument("stdev_floor must be >= 0");
}

nlohmann::ordered_json to_json(const FinetuneConfig& c) {
  return {{"alpha", c.alpha},           {"clip", c.clip},
          {"epochs", c.epochs},         {"minibatch", c.minibatch},
          {"episodes", c.episodes},     {"iterations", c.iterations},
          {"learning_rate", c.learning_rate}, {"seed", c.seed},
          {"whiten", c.whiten},         {"advantage", to_string(c.advantage)},
          {"discount", c.discount},     {"stdev_floor", c.stdev_floor}};
}

FinetuneConfig finetune_config_from_json(const nlohmann::ordered_json& j) {
  FinetuneConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.clip = j.value("clip", c.clip);
  c.epochs = j.value("epochs", c.epochs);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.episodes = j.value("episodes", c.episodes);
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.whiten = j.value("whiten", c.whiten);
  if (j.contains("advantage")) {
    c.advantage = advantage_mode_from_string(j.at("advantage").get<std::string>());
  }
  c.discount = j.value("discount", c.discount);
  c.stdev_floor = j.value("stdev_floor", c.stdev_floor);
  return c;
}

std::string to_string(AdvantageMode mode) {
  return mode == AdvantageMode::kReturn ? "return" : "chunk";
}

AdvantageMode advantage_mode_from_string(const std::string& name) {
  if (name == "chunk") return AdvantageMode::kChunk;
  if (name == "return") return AdvantageMode::kReturn;
  throw std::invalid_argument("unknown advantage mode '" + name + "'");
}

Eigen::VectorXd raw_advantages(const RolloutBatch& batch, AdvantageMode mode, int max_steps,
                               double discount) {
  const int n = batch.size();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = batch.points[i].reward;
  if (mode == AdvantageMode::kChunk || n == 0) return out;

  // Points of one episode, in time order.
  std::vector<std::vector<int>> by_episode(batch.episodes.size());
  for (int i = 0; i < n; ++i) by_episode.at(batch.points[i].episode).push_back(i);
  std::map<int, std::pair<double, int>> by_time;  // t -> (sum, count)
  for (auto& idx : by_episode) {
    if (idx.empty()) continue;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return batch.points[a].t < batch.points[b].t; });
    const DecisionPoint& last = batch.points[idx.back()];
    const int chunk = static_cast<int>(last.executed.size());
    const int remaining = std::max(0, max_steps - (last.t + chunk));
    const int extra_chunks = (remaining + chunk - 1) / chunk;
    double tail = 1.0;  // sum of discount^j, j = 0..extra_chunks
    for (int j = 0; j < extra_chunks; ++j) tail = 1.0 + discount * tail;
    double ret = last.reward * tail;
    for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
      if (it != idx.rbegin()) ret = batch.points[*it].reward + discount * ret;
      out(*it) = ret;
      auto& [sum, count] = by_time[batch.points[*it].t];
      sum += ret;
      ++count;
    }
  }
  // Per-time baseline. Padding every episode to the full horizon makes a
  // constant reward offset add the same amount to all returns at a given t,
  // so the baseline removes it; a time reached by one episode only gets 0.
  for (int i = 0; i < n; ++i) {
    const auto& [sum, count] = by_time.at(batch.points[i].t);
    out(i) -= sum / count;
  }
  return out;
}

Eigen::VectorXd whiten(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("whiten: empty batch");
  const Eigen::Map<const Eigen::VectorXd> r(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
  const double mean = r.mean();
  const double std = std::sqrt((r.array() - mean).square().mean());
  return (r.array() - mean) / (std + 1e-8);
}

double step_kl(const diffusion::DiffusionPolicy& policy,
               const diffusion::DiffusionPolicy& reference, const Eigen::VectorXd& cond,
               const Eigen::VectorXd& input, int k_from, int k_to) {
  const diffusion::StepCoefficients co =
      diffusion::step_coefficients(policy.schedule, k_from, k_to);
  if (!(co.stdev > 0.0)) throw std::invalid_argument("step_kl: deterministic step has no KL");
  const Eigen::MatrixXd eps = diffusion::predict_noise(policy, input, cond, k_from);
  const Eigen::MatrixXd eps_ref = diffusion::predict_noise(reference, input, cond, k_from);
  const double diff = co.noise_coeff * (eps - eps_ref).norm();
  return diff * diff / (2.0 * co.stdev * co.stdev);
}

std::vector<StepRef> all_steps(const RolloutBatch& batch) {
  std::vector<StepRef> out;
  const auto steps = static_cast<int>(batch.traces.transitions.size());
  for (int p = 0; p < batch.size(); ++p) {
    for (int i = 0; i < steps; ++i) out.push_back({p, i});
  }
  return out;
}

Eigen::VectorXd recompute_log_probs(const diffusion::DiffusionPolicy& policy,
                                    const RolloutBatch& batch, std::span<const StepRef> steps) {
  const Gathered g = gather(policy, batch, steps);
  const Eigen::MatrixXd eps = diffusion::predict_noise(policy, g.inputs, g.cond, g.k_from);
  return log_probs_of(g, means_of(g, eps));
}

PpoLoss ppo_loss(const diffusion::DiffusionPolicy& policy, const RolloutBatch& batch,
                 const Eigen::VectorXd& advantages, std::span<const StepRef> steps,
                 double alpha, double clip) {
  if (steps.empty()) throw std::invalid_argument("ppo_loss: no steps");
  if (advantages.size() != batch.size()) {
    throw std::invalid_argument("ppo_loss: one advantage per decision point required");
  }
  const Gathered g = gather(policy, batch, steps);
  numgrad::MlpTape tape;
  const Eigen::MatrixXd eps =
      diffusion::predict_noise(policy, g.inputs, g.cond, g.k_from, &tape);
  const Eigen::MatrixXd mean = means_of(g, eps);
  const Eigen::VectorXd logp = log_probs_of(g, mean);

  const auto m = static_cast<Eigen::Index>(steps.size());
  const double inv_m = 1.0 / static_cast<double>(m);
  PpoLoss out;
  Eigen::MatrixXd d_eps(mean.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double adv = advantages(steps[j].point);
    const double raw_log_ratio = logp(j) - g.old_log_prob(j);
    const bool clamped = std::abs(raw_log_ratio) > kLogRatioClamp;
    const double ratio =
        std::exp(std::clamp(raw_log_ratio, -kLogRatioClamp, kLogRatioClamp));
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    const double surrogate = std::min(unclipped, clipped);
    // d surrogate / d logp; zero where the clipped branch is active or the
    // log-ratio was clamped.
    const double d_logp = (!clamped && unclipped <= clipped) ? unclipped : 0.0;

    const double var = g.stdev(j) * g.stdev(j);
    const Eigen::VectorXd to_ref = mean.col(j) - g.ref_means.col(j);
    const double kl = to_ref.squaredNorm() / (2.0 * var);

    out.surrogate += surrogate * inv_m;
    out.kl += kl * inv_m;
    out.mean_ratio += ratio * inv_m;
    out.clip_fraction += (std::abs(ratio - 1.0) > clip ? 1.0 : 0.0) * inv_m;
    out.clamped += clamped ? 1 : 0;

    const Eigen::VectorXd d_mean =
        (-d_logp * (g.outputs.col(j) - mean.col(j)) + alpha * to_ref) / var * inv_m;
    d_eps.col(j) = g.noise_coeff(j) * d_mean;
  }
  out.loss = -out.surrogate + alpha * out.kl;
  if (!std::isfinite(out.loss)) throw std::runtime_error("ppo_loss: non-finite loss");
  out.grads = policy.params.zeros_like();
  numgrad::backward_batch(policy.net, policy.params, tape, d_eps, out.grads);
  return out;
}

PpoStats ppo_update(diffusion::DiffusionPolicy& policy, const RolloutBatch& batch,
                    const Eigen::VectorXd& advantages, const FinetuneConfig& config,
                    numgrad::AdamState& adam, std::uint64_t seed) {
  config.validate();
  std::vector<StepRef> steps = all_steps(batch);
  PpoStats stats;
  if (steps.empty()) return stats;
  auto rng = make_rng(seed, /*stream=*/0x990);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(steps.begin(), steps.end(), rng);
    for (std::size_t start = 0; start < steps.size(); start += config.minibatch) {
      const std::size_t len = std::min<std::size_t>(config.minibatch, steps.size() - start);
      const std::span<const StepRef> mb(steps.data() + start, len);
      PpoLoss l = ppo_loss(policy, batch, advantages, mb, config.alpha, config.clip);
      numgrad::adam_step(policy.params, l.grads, adam);
      stats.mean_ratio += l.mean_ratio;
      stats.clip_fraction += l.clip_fraction;
      stats.kl += l.kl;
      stats.surrogate += l.surrogate;
      stats.loss += l.loss;
      stats.clamped += l.clamped;
      ++stats.minibatches;
    }
  }
  const double n = stats.minibatches;
  stats.mean_ratio /= n;
  stats.clip_fraction /= n;
  stats.kl /= n;
  stats.surrogate /= n;
  stats.loss /= n;
  return stats;
}

nlohmann::ordered_json to_json(const IterationLog& log) {
  const nlohmann::ordered_json m = to_json(log.metrics);
  nlohmann::ordered_json j;
  j["iter"] = log.iter;
  j["mean_reward"] = m.at("mean_reward");
  j["kl_mean"] = m.at("kl_mean");
  j["clip_frac"] = log.ppo.clip_fraction;
  j["success_rate"] = log.metrics.success_rate;
  j["occupancy"] = m.at("occupancy");
  j["displacement_avg"] = m.at("displacement_avg");
  j["displacement_term"] = m.at("displacement_term");
  j["misalign_avg"] = m.at("misalign_avg");
  j["misalign_term"] = m.at("misalign_term");
  j["rollout_len"] = log.metrics.rollout_len;
  j["constraint_satisfaction"] = m.at("constraint_satisfaction");
  j["ppo"] = {{"mean_ratio", log.ppo.mean_ratio}, {"kl", log.ppo.kl},
              {"surrogate", log.ppo.surrogate},   {"loss", log.ppo.loss},
              {"clamped", log.ppo.clamped},       {"minibatches", log.ppo.minibatches}};
  return j;
}

diffusion::DiffusionPolicy finetune_loop(const diffusion::DiffusionPolicy& pretrained,
                                         const preference::RewardModel& reward,
                                         const envs::EnvConfig& env_config,
                                         const FinetuneConfig& config,
                                         const IterationLogFn& log) {
  config.validate();
  if (pretrained.schedule.eta() <= 0.0) {
    throw std::invalid_argument("fine-tuning needs eta > 0");
  }
  if (reward.env != env_config.id) {
    throw std::invalid_argument("reward model was trained for " + envs::to_string(reward.env));
  }
  if (config.iterations == 0) return pretrained;
  const diffusion::DiffusionPolicy reference =
      config.stdev_floor > 0.0 ? diffusion::with_stdev_floor(pretrained, config.stdev_floor)
                               : pretrained;
  diffusion::DiffusionPolicy policy = reference;
  numgrad::AdamState adam =
      numgrad::make_adam_state(policy.params, {.learning_rate = config.learning_rate});
  const int ta = policy.horizons.exec_steps;
  const ChunkRewardFn chunk_reward = [&](std::span<const envs::State> states) {
    return preference::sequence_reward(reward, states, ta);
  };
  for (int iter = 0; iter < config.iterations; ++iter) {
    const std::uint64_t iter_seed = derive_seed(config.seed, static_cast<std::uint64_t>(iter));
    const RolloutBatch batch = collect_rollouts(policy, &reference, chunk_reward, env_config,
                                                config.episodes, iter_seed);
    const Eigen::VectorXd raw = raw_advantages(batch, config.advantage, env_config.max_steps, config.discount);
    const Eigen::VectorXd adv =
        config.whiten ? whiten(std::span<const double>(raw.data(), raw.size())) : raw;
    IterationLog entry;
    entry.iter = iter;
    entry.metrics = batch_metrics(batch, env_config);
    entry.ppo = ppo_update(policy, batch, adv, config, adam, derive_seed(iter_seed, 1));
    if (log) log(entry);
  }
  return policy;
}

}  // namespace fdpp::finetune
