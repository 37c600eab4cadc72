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

#ifndef FDPP_FINETUNE_ROLLOUT_H_
#define FDPP_FINETUNE_ROLLOUT_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fdpp/diffusion/policy.h"
#include "fdpp/diffusion/sampler.h"
#include "fdpp/envs/env.h"
#include "fdpp/envs/trajectory.h"
#include "fdpp/finetune/metrics.h"

namespace fdpp::finetune {

// Scores the T_a states reached by executing one action chunk.
using ChunkRewardFn = std::function<double(std::span<const envs::State>)>;

struct DecisionPoint {
  int episode = 0;  // index into RolloutBatch::episodes
  int t = 0;        // env time at which the chunk was sampled
  // States after each executed action. When the episode ends inside the
  // chunk, the terminal state is repeated to T_a entries.
  std::vector<envs::State> executed;
  double reward = 0.0;
};

// Decision point i owns column i of every matrix in `traces`.
struct RolloutBatch {
  diffusion::BatchTrace traces;
  std::vector<DecisionPoint> points;
  std::vector<envs::Trajectory> episodes;

  int size() const { return static_cast<int>(points.size()); }
};

// Seed used to reset episode `index` of a collection seeded with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index);

// Runs n_episodes in lockstep, sampling all active episodes' action chunks in
// one batch. Episode i starts from reset(config, episode_seed(seed, i)); its
// j-th chunk draws noise from a seed derived from that episode seed, so
// results do not depend on which other episodes share the batch. `reference`
// (may be null) supplies reference log-probs; `reward` (may be empty) fills
// DecisionPoint::reward and throws std::runtime_error on a non-finite value.
RolloutBatch collect_rollouts(const diffusion::DiffusionPolicy& policy,
                              const diffusion::DiffusionPolicy* reference,
                              const ChunkRewardFn& reward, const envs::EnvConfig& config,
                              int n_episodes, std::uint64_t seed);

// Per-step closed-form KL between the policy and its reference at every
// recorded step of the batch, averaged over steps and decision points.
double mean_trace_kl(const diffusion::BatchTrace& traces);

// Behavior metrics over the batch's episodes plus mean reward / KL.
Metrics batch_metrics(const RolloutBatch& batch, const envs::EnvConfig& config);

// Evaluation rollouts with deterministic seeds; no reference, no reward.
Metrics eval_policy(const diffusion::DiffusionPolicy& policy, const envs::EnvConfig& config,
                    int n_episodes, std::uint64_t seed,
                    std::vector<envs::Trajectory>* episodes = nullptr);

}  // namespace fdpp::finetune

#endif  // FDPP_FINETUNE_ROLLOUT_H_
