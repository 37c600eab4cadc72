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

#ifndef FDPP_DIFFUSION_SAMPLER_H_
#define FDPP_DIFFUSION_SAMPLER_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/diffusion/policy.h"
#include "fdpp/diffusion/schedule.h"

namespace fdpp::diffusion {

// x^k = sqrt(alpha_bar_k) x0 + sqrt(1 - alpha_bar_k) noise.
Eigen::VectorXd forward_sample(const NoiseSchedule& schedule, const Eigen::VectorXd& x0, int k,
                               const Eigen::VectorXd& noise);

// Mean of q(x^{k-1} | x^k, x0).
Eigen::VectorXd posterior_mean(const NoiseSchedule& schedule, const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& xk, int k);

// Noise prediction turned into a clean-sample estimate.
Eigen::VectorXd predict_clean(const NoiseSchedule& schedule, const Eigen::VectorXd& xk, int k,
                              const Eigen::VectorXd& eps_hat);

// The reverse-step mean is affine in the current sample and the predicted
// noise: mean = input_coeff * x^{k_from} + noise_coeff * eps_hat.
struct StepCoefficients {
  int k_from = 0;
  int k_to = 0;
  double input_coeff = 0.0;
  double noise_coeff = 0.0;
  double stdev = 0.0;  // floored; used for sampling and densities
};

// Throws std::invalid_argument unless (k_from, k_to) is a DDIM transition of
// the schedule or a single step k -> k-1.
StepCoefficients step_coefficients(const NoiseSchedule& schedule, int k_from, int k_to);

struct StepResult {
  Eigen::VectorXd output;
  Eigen::VectorXd mean;
  double stdev = 0.0;
};

// One reverse step from a given noise prediction.
StepResult reverse_step_from_prediction(const NoiseSchedule& schedule, const Eigen::VectorXd& xk,
                                        const Eigen::VectorXd& eps_hat, int k_from, int k_to,
                                        const Eigen::VectorXd& noise);

// One reverse step of `policy` with normalized conditioning `cond`.
StepResult reverse_step(const DiffusionPolicy& policy, const Eigen::VectorXd& xk,
                        const Eigen::VectorXd& cond, int k_from, int k_to,
                        const Eigen::VectorXd& noise);

// Sum of log N(x; mean_c, stdev^2 I) over rows, per column.
Eigen::VectorXd gaussian_log_density(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mean,
                                     double stdev);

struct DenoisingStep {
  int k_from = 0;
  int k_to = 0;
  Eigen::VectorXd input;
  Eigen::VectorXd output;
  Eigen::VectorXd mean;
  double stdev = 0.0;
  double log_prob = 0.0;      // 0 for deterministic (eta = 0) steps
  double ref_log_prob = 0.0;  // equals log_prob when no reference is given
  Eigen::VectorXd ref_mean;
};

struct DenoisingTrace {
  Eigen::VectorXd cond;
  std::vector<DenoisingStep> steps;
  Eigen::VectorXd actions;  // clipped final sample
};

// Batched sampling state: column c of every matrix belongs to one chain.
// Step matrices are sample_dim x n.
struct BatchTrace {
  Eigen::MatrixXd cond;
  std::vector<std::pair<int, int>> transitions;
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
  std::vector<Eigen::MatrixXd> means;
  std::vector<Eigen::MatrixXd> ref_means;
  std::vector<double> stdevs;
  std::vector<Eigen::VectorXd> log_probs;
  std::vector<Eigen::VectorXd> ref_log_probs;
  Eigen::MatrixXd actions;  // clipped to [-1, 1]

  int size() const { return static_cast<int>(actions.cols()); }
  DenoisingTrace column(int c) const;
};

// Runs the DDIM chain for n = cond.cols() chains (or `count` chains when the
// policy is unconditional). Chain c draws all its noise from
// make_rng(seeds[c], ...), so a chain's result does not depend on the batch it
// was sampled in. `reference` fills ref_means / ref_log_probs.
BatchTrace sample_batch(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                        std::span<const std::uint64_t> seeds,
                        const DiffusionPolicy* reference = nullptr);

DenoisingTrace sample_action_sequence(const DiffusionPolicy& policy, const Eigen::VectorXd& cond,
                                      std::uint64_t seed,
                                      const DiffusionPolicy* reference = nullptr);

// Ancestral sampling through every k = K..1 with posterior variances, the
// reference sampler for DDIM comparisons. Unclipped; sample_dim x n.
Eigen::MatrixXd sample_ddpm(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                            std::span<const std::uint64_t> seeds);

// Normalized conditioning vector from up to T_s raw recent states (oldest
// first). Missing history is padded by repeating the oldest state.
Eigen::VectorXd condition_from_states(const DiffusionPolicy& policy,
                                      std::span<const std::vector<double>> recent_states);

// Rows are env actions; the first T_a of the predicted sequence.
std::vector<std::vector<double>> actions_from_sample(const DiffusionPolicy& policy,
                                                     const Eigen::VectorXd& sample);

std::vector<std::vector<double>> act(const DiffusionPolicy& policy,
                                     std::span<const std::vector<double>> recent_states,
                                     std::uint64_t seed);

}  // namespace fdpp::diffusion

#endif  // FDPP_DIFFUSION_SAMPLER_H_
