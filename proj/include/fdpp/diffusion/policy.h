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

#ifndef FDPP_DIFFUSION_POLICY_H_
#define FDPP_DIFFUSION_POLICY_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdpp/diffusion/schedule.h"
#include "fdpp/numgrad/mlp.h"
#include "fdpp/numgrad/param_store.h"
#include "json.hpp"

namespace fdpp::diffusion {

struct Horizons {
  int obs_steps = 2;   // T_s (0 for unconditional models)
  int pred_steps = 8;  // T_p
  int exec_steps = 4;  // T_a

  void validate() const;
  bool operator==(const Horizons&) const = default;
};

// Per-dimension affine map of [low, high] onto [-1, 1]; ranges narrower than
// kRangeFloor are widened to it.
class Normalizer {
 public:
  static constexpr double kRangeFloor = 1e-6;

  Normalizer() = default;
  Normalizer(std::vector<double> low, std::vector<double> high);
  // Min/max over rows of equal length.
  static Normalizer fit(const std::vector<std::vector<double>>& rows);
  // Identity map on `dim` dimensions.
  static Normalizer identity(int dim);

  int dim() const { return static_cast<int>(low_.size()); }
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> z) const;
  const std::vector<double>& low() const { return low_; }
  const std::vector<double>& high() const { return high_; }

  bool operator==(const Normalizer&) const = default;

 private:
  std::vector<double> low_;
  std::vector<double> high_;
};

nlohmann::ordered_json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::ordered_json& j);

struct PolicyConfig {
  std::vector<int> hidden_dims{256, 256, 256};
  numgrad::Activation activation = numgrad::Activation::kGelu;
  int embed_dim = 16;
  Horizons horizons;
  ScheduleConfig schedule;
};

nlohmann::ordered_json to_json(const Horizons& h);
Horizons horizons_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const PolicyConfig& config);
// Missing keys keep their defaults.
PolicyConfig policy_config_from_json(const nlohmann::ordered_json& j);

// Noise-prediction network eps_theta(A^k, S, k) plus everything needed to
// sample from it. Network input is [A^k (T_p*A), S (T_s*S), emb(k)].
struct DiffusionPolicy {
  numgrad::MlpSpec net;
  numgrad::ParamStore params;
  NoiseSchedule schedule;
  Horizons horizons;
  int action_dim = 0;
  int state_dim = 0;
  int embed_dim = 16;
  Normalizer state_norm;
  Normalizer action_norm;

  int sample_dim() const { return horizons.pred_steps * action_dim; }
  int cond_dim() const { return horizons.obs_steps * state_dim; }
  // Throws std::invalid_argument on any inconsistency.
  void validate() const;
};

// Copy of `policy` whose sampler uses `floor` as the minimum stochastic-step
// stdev.
DiffusionPolicy with_stdev_floor(DiffusionPolicy policy, double floor);

// Fresh policy; the final layer is zero so an untrained model predicts no
// noise.
DiffusionPolicy make_policy(const PolicyConfig& config, int action_dim, int state_dim,
                            Normalizer state_norm, Normalizer action_norm,
                            std::uint64_t seed);

// Assembles network inputs for a batch. `noisy` is sample_dim x n, `cond`
// cond_dim x n (may have zero rows), `steps` has n entries.
Eigen::MatrixXd network_input(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, std::span<const int> steps);

// eps_theta for a batch; optionally records the tape for backprop.
Eigen::MatrixXd predict_noise(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, std::span<const int> steps,
                              numgrad::MlpTape* tape = nullptr);

// Same as above with a common step for every column.
Eigen::MatrixXd predict_noise(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, int step,
                              numgrad::MlpTape* tape = nullptr);

// numgrad checkpoint extended with "schedule", "horizons", "norm" and
// "dims". `metadata` keys are merged at top level.
nlohmann::ordered_json to_json(const DiffusionPolicy& policy);
DiffusionPolicy policy_from_json(const nlohmann::ordered_json& j);
void save_policy(const std::filesystem::path& path, const DiffusionPolicy& policy,
                 const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
DiffusionPolicy load_policy(const std::filesystem::path& path);

}  // namespace fdpp::diffusion

#endif  // FDPP_DIFFUSION_POLICY_H_
