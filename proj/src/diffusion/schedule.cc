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

#include "fdpp/diffusion/schedule.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdpp::diffusion {

nlohmann::ordered_json to_json(const ScheduleConfig& c) {
  return {{"train_steps", c.train_steps}, {"beta_start", c.beta_start},
          {"beta_end", c.beta_end},       {"ddim_steps", c.ddim_steps},
          {"eta", c.eta},                 {"stdev_floor", c.stdev_floor}};
}

ScheduleConfig schedule_config_from_json(const nlohmann::ordered_json& j) {
  ScheduleConfig c;
  c.train_steps = j.value("train_steps", c.train_steps);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  c.ddim_steps = j.value("ddim_steps", c.ddim_steps);
  c.eta = j.value("eta", c.eta);
  c.stdev_floor = j.value("stdev_floor", c.stdev_floor);
  return c;
}

NoiseSchedule NoiseSchedule::make(const ScheduleConfig& c) {
  if (c.train_steps < 1 || c.ddim_steps < 1 || c.ddim_steps > c.train_steps) {
    throw std::invalid_argument("schedule requires K >= K_ddim >= 1");
  }
  if (!(c.beta_start > 0.0 && c.beta_start <= c.beta_end && c.beta_end < 1.0)) {
    throw std::invalid_argument("schedule requires 0 < beta_1 <= beta_K < 1");
  }
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (!(c.stdev_floor >= 0.0)) throw std::invalid_argument("stdev_floor must be >= 0");

  NoiseSchedule s;
  s.config_ = c;
  const int K = c.train_steps;
  s.beta_.assign(K + 1, 0.0);
  s.alpha_bar_.assign(K + 1, 1.0);
  s.posterior_variance_.assign(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    const double frac = K == 1 ? 0.0 : static_cast<double>(k - 1) / (K - 1);
    s.beta_[k] = c.beta_start + frac * (c.beta_end - c.beta_start);
    s.alpha_bar_[k] = s.alpha_bar_[k - 1] * (1.0 - s.beta_[k]);
    const double exact =
        (1.0 - s.alpha_bar_[k - 1]) / (1.0 - s.alpha_bar_[k]) * s.beta_[k];
    s.posterior_variance_[k] = std::max(exact, kPosteriorVarianceFloor);
  }
  const int M = c.ddim_steps;
  for (int i = 1; i <= M; ++i) s.ddim_.push_back(i * K / M);
  return s;
}

std::vector<std::pair<int, int>> NoiseSchedule::ddim_transitions() const {
  std::vector<std::pair<int, int>> out;
  for (int i = static_cast<int>(ddim_.size()) - 1; i >= 0; --i) {
    out.emplace_back(ddim_[i], i == 0 ? 0 : ddim_[i - 1]);
  }
  return out;
}

double NoiseSchedule::ddim_raw_stdev(int k_from, int k_to) const {
  const double ab_from = alpha_bar(k_from);
  const double ab_to = alpha_bar(k_to);
  const double var = (1.0 - ab_to) / (1.0 - ab_from) * (1.0 - ab_from / ab_to);
  return config_.eta * std::sqrt(std::max(var, 0.0));
}

double NoiseSchedule::ddim_stdev(int k_from, int k_to) const {
  if (config_.eta == 0.0) return 0.0;
  return std::max(ddim_raw_stdev(k_from, k_to), config_.stdev_floor);
}

NoiseSchedule schedule_make(int train_steps, double beta_start, double beta_end,
                            int ddim_steps, double eta) {
  ScheduleConfig c;
  c.train_steps = train_steps;
  c.beta_start = beta_start;
  c.beta_end = beta_end;
  c.ddim_steps = ddim_steps;
  c.eta = eta;
  return NoiseSchedule::make(c);
}

}  // namespace fdpp::diffusion
