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

#ifndef FDPP_DIFFUSION_SCHEDULE_H_
#define FDPP_DIFFUSION_SCHEDULE_H_

#include <vector>

#include "json.hpp"

namespace fdpp::diffusion {

struct ScheduleConfig {
  int train_steps = 100;     // K
  double beta_start = 1e-4;  // beta_1
  double beta_end = 0.02;    // beta_K
  int ddim_steps = 10;       // K^DDIM
  double eta = 1.0;
  // Lower bound on every stochastic reverse-step standard deviation (eta >
  // 0 only). The exact variance of the step that lands on k = 0 is zero.
  double stdev_floor = 1e-4;

  bool operator==(const ScheduleConfig&) const = default;
};

nlohmann::ordered_json to_json(const ScheduleConfig& config);
ScheduleConfig schedule_config_from_json(const nlohmann::ordered_json& j);

// Linear-beta DDPM schedule with a DDIM sub-sequence. Steps are 1-based;
// alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  // Throws std::invalid_argument unless K >= K^DDIM >= 1,
  // 0 < beta_start <= beta_end < 1, eta in [0, 1] and stdev_floor >= 0.
  static NoiseSchedule make(const ScheduleConfig& config);

  const ScheduleConfig& config() const { return config_; }
  int train_steps() const { return config_.train_steps; }
  double eta() const { return config_.eta; }

  double beta(int k) const { return beta_.at(k); }
  double alpha(int k) const { return 1.0 - beta_.at(k); }
  double alpha_bar(int k) const { return alpha_bar_.at(k); }
  // ((1 - alpha_bar(k-1)) / (1 - alpha_bar(k))) * beta(k), floored at 1e-8.
  double posterior_variance(int k) const { return posterior_variance_.at(k); }

  // tau_1 < ... < tau_M == K, evenly spaced.
  const std::vector<int>& ddim_timesteps() const { return ddim_; }
  // Reverse transitions in sampling order: (tau_M, tau_{M-1}), ..., (tau_1, 0).
  std::vector<std::pair<int, int>> ddim_transitions() const;

  // Unfloored eta-scaled DDIM standard deviation for k_from -> k_to.
  double ddim_raw_stdev(int k_from, int k_to) const;
  // Standard deviation used for sampling and log-probabilities.
  double ddim_stdev(int k_from, int k_to) const;

  bool operator==(const NoiseSchedule& other) const { return config_ == other.config_; }

 private:
  ScheduleConfig config_;
  std::vector<double> beta_;       // index 0 unused (0.0)
  std::vector<double> alpha_bar_;  // index 0 == 1
  std::vector<double> posterior_variance_;
  std::vector<int> ddim_;
};

inline constexpr double kPosteriorVarianceFloor = 1e-8;

NoiseSchedule schedule_make(int train_steps, double beta_start, double beta_end,
                            int ddim_steps, double eta);

}  // namespace fdpp::diffusion

#endif  // FDPP_DIFFUSION_SCHEDULE_H_
