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

#ifndef FDPP_FINETUNE_PPO_H_
#define FDPP_FINETUNE_PPO_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/diffusion/policy.h"
#include "fdpp/envs/env.h"
#include "fdpp/finetune/metrics.h"
#include "fdpp/finetune/rollout.h"
#include "fdpp/numgrad/adam.h"
#include "fdpp/numgrad/param_store.h"
#include "fdpp/preference/reward.h"
#include "json.hpp"

namespace fdpp::finetune {

inline constexpr double kLogRatioClamp = 20.0;

// How per-decision-point advantages are formed from chunk rewards.
//   kChunk:  the chunk's own reward.
//   kReturn: discounted reward-to-go over later chunks of the episode. A
//            finished episode keeps collecting its last chunk reward up to
//            the step limit, and the mean return of chunks sampled at the
//            same time index is subtracted (a time index reached by one
//            episode only gets 0).
enum class AdvantageMode { kChunk, kReturn };

std::string to_string(AdvantageMode mode);
AdvantageMode advantage_mode_from_string(const std::string& name);

struct FinetuneConfig {
  double alpha = 0.05;  // KL weight
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 256;  // denoising steps per Adam step
  int episodes = 16;    // per iteration
  int iterations = 150;
  double learning_rate = 5e-5;
  std::uint64_t seed = 0;
  bool whiten = true;
  AdvantageMode advantage = AdvantageMode::kReturn;
  double discount = 0.6;  // per chunk, kReturn only
  // Minimum stdev of stochastic denoising steps while fine-tuning; the output
  // policy keeps it. 0 leaves the pre-trained sampler unchanged.
  double stdev_floor = 0.3;

  // Throws std::invalid_argument unless clip in (0, 1), alpha >= 0, discount
  // in (0, 1] and the counts are positive (iterations may be 0).
  void validate() const;
};

nlohmann::ordered_json to_json(const FinetuneConfig& config);
FinetuneConfig finetune_config_from_json(const nlohmann::ordered_json& j);

// (r - mean) / (std + 1e-8) with the population std; a single reward maps
// to 0.
Eigen::VectorXd whiten(std::span<const double> rewards);

// Raw (unwhitened) advantages under `mode`, one per decision point.
// `max_steps` is the episode step limit.
Eigen::VectorXd raw_advantages(const RolloutBatch& batch, AdvantageMode mode, int max_steps,
                               double discount = 1.0);

// Closed-form KL between the policy's and the reference's Gaussian reverse
// kernels at one recorded step. Throws std::invalid_argument when the step is
// deterministic (stdev 0).
double step_kl(const diffusion::DiffusionPolicy& policy,
               const diffusion::DiffusionPolicy& reference, const Eigen::VectorXd& cond,
               const Eigen::VectorXd& input, int k_from, int k_to);

// One denoising step of one decision point in a RolloutBatch.
struct StepRef {
  int point = 0;
  int step = 0;
};

std::vector<StepRef> all_steps(const RolloutBatch& batch);

struct PpoLoss {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate
  double kl = 0.0;         // mean per-step KL to the reference
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  int clamped = 0;  // steps whose log-ratio hit the clamp
  numgrad::ParamStore grads;
};

// Clipped-surrogate loss plus alpha-weighted per-step KL over `steps`, with
// gradients. Log-probs of `batch` are the behavior policy's; the reference
// means stored in the batch are reused.
PpoLoss ppo_loss(const diffusion::DiffusionPolicy& policy, const RolloutBatch& batch,
                 const Eigen::VectorXd& advantages, std::span<const StepRef> steps,
                 double alpha, double clip);

// Per-step log-probabilities of the recorded outputs under `policy`.
Eigen::VectorXd recompute_log_probs(const diffusion::DiffusionPolicy& policy,
                                    const RolloutBatch& batch, std::span<const StepRef> steps);

struct PpoStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double surrogate = 0.0;
  double loss = 0.0;
  int clamped = 0;
  int minibatches = 0;
};

// Epochs of shuffled minibatches, one Adam step each. Statistics are averaged
// over minibatches.
PpoStats ppo_update(diffusion::DiffusionPolicy& policy, const RolloutBatch& batch,
                    const Eigen::VectorXd& advantages, const FinetuneConfig& config,
                    numgrad::AdamState& adam, std::uint64_t seed);

struct IterationLog {
  int iter = 0;
  Metrics metrics;  // of the rollouts collected this iteration
  PpoStats ppo;
};

nlohmann::ordered_json to_json(const IterationLog& log);

using IterationLogFn = std::function<void(const IterationLog&)>;

// Iterations of collect -> whiten -> PPO update against a frozen copy of
// `pretrained`. Zero iterations return `pretrained` unchanged.
diffusion::DiffusionPolicy finetune_loop(const diffusion::DiffusionPolicy& pretrained,
                                         const preference::RewardModel& reward,
                                         const envs::EnvConfig& env_config,
                                         const FinetuneConfig& config,
                                         const IterationLogFn& log = {});

}  // namespace fdpp::finetune

#endif  // FDPP_FINETUNE_PPO_H_
