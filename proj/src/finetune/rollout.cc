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

#include "fdpp/finetune/rollout.h"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "fdpp/common/rng.h"

namespace fdpp::finetune {
namespace {

constexpr std::uint64_t kEpisodeStream = 0xE915;
constexpr std::uint64_t kChunkStream = 0xC4C0;

void append_columns(Eigen::MatrixXd& dst, const Eigen::MatrixXd& src) {
  if (dst.cols() == 0) {
    dst = src;
    return;
  }
  const Eigen::Index old = dst.cols();
  dst.conservativeResize(Eigen::NoChange, old + src.cols());
  dst.rightCols(src.cols()) = src;
}

void append_entries(Eigen::VectorXd& dst, const Eigen::VectorXd& src) {
  const Eigen::Index old = dst.size();
  dst.conservativeResize(old + src.size());
  dst.tail(src.size()) = src;
}

void append_trace(diffusion::BatchTrace& dst, const diffusion::BatchTrace& src) {
  if (dst.transitions.empty()) {
    dst = src;
    return;
  }
  append_columns(dst.cond, src.cond);
  for (std::size_t i = 0; i < src.transitions.size(); ++i) {
    append_columns(dst.inputs[i], src.inputs[i]);
    append_columns(dst.outputs[i], src.outputs[i]);
    append_columns(dst.means[i], src.means[i]);
    append_columns(dst.ref_means[i], src.ref_means[i]);
    append_entries(dst.log_probs[i], src.log_probs[i]);
    append_entries(dst.ref_log_probs[i], src.ref_log_probs[i]);
  }
  append_columns(dst.actions, src.actions);
}

struct LiveEpisode {
  int index = 0;
  std::uint64_t seed = 0;
  int chunks = 0;
  std::deque<std::vector<double>> history;  // latest T_s observations
};

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(seed, kEpisodeStream + (index << 20));
}

RolloutBatch collect_rollouts(const diffusion::DiffusionPolicy& policy,
                              const diffusion::DiffusionPolicy* reference,
                              const ChunkRewardFn& reward, const envs::EnvConfig& config,
                              int n_episodes, std::uint64_t seed) {
  if (n_episodes < 0) throw std::invalid_argument("collect_rollouts: negative episode count");
  const int obs_dim = envs::observation_dim(config.id);
  if (policy.action_dim != envs::action_dim(config.id) ||
      (policy.horizons.obs_steps > 0 && policy.state_dim != obs_dim)) {
    throw std::invalid_argument("collect_rollouts: policy dims do not match env " +
                                envs::to_string(config.id));
  }
  const int ts = std::max(1, policy.horizons.obs_steps);
  const int ta = policy.horizons.exec_steps;

  RolloutBatch batch;
  std::vector<LiveEpisode> live;
  for (int e = 0; e < n_episodes; ++e) {
    LiveEpisode ep;
    ep.index = e;
    ep.seed = episode_seed(seed, e);
    envs::Trajectory traj;
    traj.episode = static_cast<std::uint64_t>(e);
    traj.states.push_back(envs::reset(config, ep.seed));
    ep.history.push_back(envs::observe(traj.states.back()));
    batch.episodes.push_back(std::move(traj));
    live.push_back(std::move(ep));
  }

  while (!live.empty()) {
    const auto n = static_cast<Eigen::Index>(live.size());
    Eigen::MatrixXd cond(policy.cond_dim(), policy.cond_dim() > 0 ? n : 0);
    std::vector<std::uint64_t> seeds;
    for (Eigen::Index c = 0; c < n; ++c) {
      LiveEpisode& ep = live[c];
      if (policy.cond_dim() > 0) {
        const std::vector<std::vector<double>> hist(ep.history.begin(), ep.history.end());
        cond.col(c) = diffusion::condition_from_states(policy, hist);
      }
      seeds.push_back(derive_seed(ep.seed, kChunkStream + static_cast<std::uint64_t>(ep.chunks)));
      ++ep.chunks;
    }
    const diffusion::BatchTrace round = diffusion::sample_batch(policy, cond, seeds, reference);
    append_trace(batch.traces, round);

    std::vector<LiveEpisode> still;
    for (Eigen::Index c = 0; c < n; ++c) {
      LiveEpisode& ep = live[c];
      envs::Trajectory& traj = batch.episodes[ep.index];
      DecisionPoint dp;
      dp.episode = ep.index;
      dp.t = envs::time_of(traj.states.back());
      const auto actions = diffusion::actions_from_sample(policy, round.actions.col(c));
      bool done = false;
      for (int j = 0; j < ta && !done; ++j) {
        const envs::StepResult r = envs::step(traj.states.back(), actions[j], config);
        traj.actions.push_back(actions[j]);
        traj.states.push_back(r.state);
        dp.executed.push_back(r.state);
        ep.history.push_back(envs::observe(r.state));
        while (static_cast<int>(ep.history.size()) > ts) ep.history.pop_front();
        done = r.done;
      }
      while (static_cast<int>(dp.executed.size()) < ta) dp.executed.push_back(dp.executed.back());
      if (reward) {
        dp.reward = reward(dp.executed);
        if (!std::isfinite(dp.reward)) {
          throw std::runtime_error("non-finite reward at episode " + std::to_string(dp.episode) +
                                   ", t=" + std::to_string(dp.t));
        }
      }
      batch.points.push_back(std::move(dp));
      if (!done) still.push_back(std::move(ep));
    }
    live = std::move(still);
  }
  return batch;
}

double mean_trace_kl(const diffusion::BatchTrace& traces) {
  const std::size_t steps = traces.transitions.size();
  if (steps == 0 || traces.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double var = traces.stdevs[i] * traces.stdevs[i];
    total += (traces.means[i] - traces.ref_means[i]).squaredNorm() / (2.0 * var);
  }
  return total / static_cast<double>(steps * traces.size());
}

Metrics batch_metrics(const RolloutBatch& batch, const envs::EnvConfig& config) {
  Metrics m = compute_metrics(batch.episodes, config);
  double r = 0.0;
  for (const auto& p : batch.points) r += p.reward;
  m.mean_reward = batch.points.empty() ? 0.0 : r / batch.size();
  m.kl_mean = mean_trace_kl(batch.traces);
  return m;
}

Metrics eval_policy(const diffusion::DiffusionPolicy& policy, const envs::EnvConfig& config,
                    int n_episodes, std::uint64_t seed,
                    std::vector<envs::Trajectory>* episodes) {
  RolloutBatch batch = collect_rollouts(policy, nullptr, {}, config, n_episodes, seed);
  Metrics m = compute_metrics(batch.episodes, config);
  if (episodes != nullptr) *episodes = std::move(batch.episodes);
  return m;
}

}  // namespace fdpp::finetune
