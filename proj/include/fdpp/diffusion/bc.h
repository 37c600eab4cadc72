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

#ifndef FDPP_DIFFUSION_BC_H_
#define FDPP_DIFFUSION_BC_H_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/diffusion/policy.h"
#include "fdpp/envs/trajectory.h"
#include "fdpp/numgrad/param_store.h"

namespace fdpp::diffusion {

// Normalized (conditioning, action-sequence) training windows, one column per
// window.
struct WindowDataset {
  Eigen::MatrixXd cond;     // cond_dim x n
  Eigen::MatrixXd actions;  // sample_dim x n

  int size() const { return static_cast<int>(actions.cols()); }
};

// Normalizers fitted to every observation and action in the demos.
std::pair<Normalizer, Normalizer> fit_normalizers(const std::vector<envs::Trajectory>& demos);

// One window per decision time t of every demo: the T_s latest observations
// up to s_t (padded with s_0) and actions a_t .. a_{t+T_p-1} (padded with the
// final action).
WindowDataset make_windows(const DiffusionPolicy& policy,
                           const std::vector<envs::Trajectory>& demos);

struct LossAndGrad {
  double loss = 0.0;
  numgrad::ParamStore grads;
};

// Noise-matching objective: mean over the batch and sample dimensions of
// (eps - eps_theta(sqrt(ab_k) x0 + sqrt(1 - ab_k) eps, cond, k))^2 with k
// uniform in 1..K. Throws std::runtime_error on a non-finite loss.
LossAndGrad bc_loss(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                    const Eigen::MatrixXd& actions, std::uint64_t seed);

// Mean-form loss for one sample: ||posterior_mean(x0, x^k, k) - mu_theta||^2
// where mu_theta is the posterior mean at the predicted clean sample.
double mean_form_loss(const NoiseSchedule& schedule, const Eigen::VectorXd& x0,
                      const Eigen::VectorXd& xk, int k, const Eigen::VectorXd& eps_hat);

struct BcConfig {
  int steps = 20000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int log_every = 100;
};

nlohmann::ordered_json to_json(const BcConfig& config);
BcConfig bc_config_from_json(const nlohmann::ordered_json& j);

struct BcLogEntry {
  int step = 0;
  double loss = 0.0;  // average over the steps since the previous entry
};

using BcLogFn = std::function<void(const BcLogEntry&)>;

// Adam on bc_loss with minibatches drawn uniformly with replacement. Returns
// the loss curve.
std::vector<BcLogEntry> train_bc(DiffusionPolicy& policy, const WindowDataset& data,
                                 const BcConfig& config, const BcLogFn& log = {});

}  // namespace fdpp::diffusion

#endif  // FDPP_DIFFUSION_BC_H_
