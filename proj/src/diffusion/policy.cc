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

#include "fdpp/diffusion/policy.h"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fdpp/common/rng.h"
#include "fdpp/numgrad/checkpoint.h"
#include "fdpp/numgrad/embedding.h"

namespace fdpp::diffusion {

void Horizons::validate() const {
  if (obs_steps < 0 || pred_steps < 1 || exec_steps < 1 || exec_steps > pred_steps) {
    std::ostringstream msg;
    msg << "invalid horizons T_s=" << obs_steps << " T_p=" << pred_steps
        << " T_a=" << exec_steps << " (need T_s >= 0, 1 <= T_a <= T_p)";
    throw std::invalid_argument(msg.str());
  }
}

Normalizer::Normalizer(std::vector<double> low, std::vector<double> high)
    : low_(std::move(low)), high_(std::move(high)) {
  if (low_.size() != high_.size()) {
    throw std::invalid_argument("normalizer bounds differ in length");
  }
  for (std::size_t i = 0; i < low_.size(); ++i) {
    if (!(high_[i] >= low_[i])) throw std::invalid_argument("normalizer bound high < low");
    if (high_[i] - low_[i] < kRangeFloor) {
      const double mid = 0.5 * (high_[i] + low_[i]);
      low_[i] = mid - 0.5 * kRangeFloor;
      high_[i] = mid + 0.5 * kRangeFloor;
    }
  }
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot fit a normalizer to no data");
  const std::size_t d = rows.front().size();
  std::vector<double> low(d, std::numeric_limits<double>::infinity());
  std::vector<double> high(d, -std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("ragged rows in normalizer fit");
    for (std::size_t i = 0; i < d; ++i) {
      low[i] = std::min(low[i], r[i]);
      high[i] = std::max(high[i], r[i]);
    }
  }
  return Normalizer(std::move(low), std::move(high));
}

Normalizer Normalizer::identity(int dim) {
  return Normalizer(std::vector<double>(dim, -1.0), std::vector<double>(dim, 1.0));
}

std::vector<double> Normalizer::normalize(std::span<const double> x) const {
  if (x.size() != low_.size()) throw std::invalid_argument("normalize: dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    z[i] = 2.0 * (x[i] - low_[i]) / (high_[i] - low_[i]) - 1.0;
  }
  return z;
}

std::vector<double> Normalizer::denormalize(std::span<const double> z) const {
  if (z.size() != low_.size()) throw std::invalid_argument("denormalize: dimension mismatch");
  std::vector<double> x(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    x[i] = low_[i] + 0.5 * (z[i] + 1.0) * (high_[i] - low_[i]);
  }
  return x;
}

DiffusionPolicy with_stdev_floor(DiffusionPolicy policy, double floor) {
  ScheduleConfig config = policy.schedule.config();
  config.stdev_floor = floor;
  policy.schedule = NoiseSchedule::make(config);
  return policy;
}

nlohmann::ordered_json to_json(const Horizons& h) {
  return {{"obs_steps", h.obs_steps}, {"pred_steps", h.pred_steps}, {"exec_steps", h.exec_steps}};
}

Horizons horizons_from_json(const nlohmann::ordered_json& j) {
  Horizons h;
  h.obs_steps = j.value("obs_steps", h.obs_steps);
  h.pred_steps = j.value("pred_steps", h.pred_steps);
  h.exec_steps = j.value("exec_steps", h.exec_steps);
  return h;
}

nlohmann::ordered_json to_json(const PolicyConfig& c) {
  return {{"hidden_dims", c.hidden_dims},
          {"activation", numgrad::to_string(c.activation)},
          {"embed_dim", c.embed_dim},
          {"horizons", to_json(c.horizons)},
          {"schedule", to_json(c.schedule)}};
}

PolicyConfig policy_config_from_json(const nlohmann::ordered_json& j) {
  PolicyConfig c;
  c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
  if (j.contains("activation")) {
    c.activation = numgrad::activation_from_string(j.at("activation").get<std::string>());
  }
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  if (j.contains("horizons")) c.horizons = horizons_from_json(j.at("horizons"));
  if (j.contains("schedule")) c.schedule = schedule_config_from_json(j.at("schedule"));
  return c;
}

nlohmann::ordered_json to_json(const Normalizer& n) {
  return {{"low", n.low()}, {"high", n.high()}};
}

Normalizer normalizer_from_json(const nlohmann::ordered_json& j) {
  return Normalizer(j.at("low").get<std::vector<double>>(),
                    j.at("high").get<std::vector<double>>());
}

void DiffusionPolicy::validate() const {
  horizons.validate();
  if (action_dim < 1 || state_dim < 0) throw std::invalid_argument("invalid policy dims");
  if (net.input_dim != sample_dim() + cond_dim() + embed_dim ||
      net.output_dim != sample_dim()) {
    throw std::invalid_argument("noise network dims do not match horizons");
  }
  if (action_norm.dim() != action_dim || state_norm.dim() != state_dim) {
    throw std::invalid_argument("normalizer dims do not match policy");
  }
  numgrad::validate_params(net, params);
}

DiffusionPolicy make_policy(const PolicyConfig& config, int action_dim, int state_dim,
                            Normalizer state_norm, Normalizer action_norm,
                            std::uint64_t seed) {
  DiffusionPolicy p;
  p.schedule = NoiseSchedule::make(config.schedule);
  p.horizons = config.horizons;
  p.horizons.validate();
  p.action_dim = action_dim;
  p.state_dim = state_dim;
  p.embed_dim = config.embed_dim;
  p.state_norm = std::move(state_norm);
  p.action_norm = std::move(action_norm);
  p.net = numgrad::MlpSpec{p.sample_dim() + p.cond_dim() + p.embed_dim, config.hidden_dims,
                           p.sample_dim(), config.activation};
  auto rng = make_rng(seed, /*stream=*/0x1417);
  p.params = numgrad::init_params(p.net, rng, /*zero_final_layer=*/true);
  p.validate();
  return p;
}

Eigen::MatrixXd network_input(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, std::span<const int> steps) {
  const Eigen::Index n = noisy.cols();
  if (noisy.rows() != policy.sample_dim() || cond.rows() != policy.cond_dim() ||
      (cond.rows() > 0 && cond.cols() != n) || static_cast<Eigen::Index>(steps.size()) != n) {
    throw std::invalid_argument("network_input: batch shapes disagree with the policy");
  }
  Eigen::MatrixXd x(policy.net.input_dim, n);
  x.topRows(policy.sample_dim()) = noisy;
  if (policy.cond_dim() > 0) x.middleRows(policy.sample_dim(), policy.cond_dim()) = cond;
  const Eigen::Index e0 = policy.sample_dim() + policy.cond_dim();
  int cached_k = -1;
  std::vector<double> emb;
  for (Eigen::Index c = 0; c < n; ++c) {
    if (steps[c] != cached_k) {
      cached_k = steps[c];
      emb = numgrad::timestep_embedding(cached_k, policy.embed_dim);
    }
    for (int i = 0; i < policy.embed_dim; ++i) x(e0 + i, c) = emb[i];
  }
  return x;
}

Eigen::MatrixXd predict_noise(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, std::span<const int> steps,
                              numgrad::MlpTape* tape) {
  return numgrad::forward_batch(policy.net, policy.params,
                                network_input(policy, noisy, cond, steps), tape);
}

Eigen::MatrixXd predict_noise(const DiffusionPolicy& policy, const Eigen::MatrixXd& noisy,
                              const Eigen::MatrixXd& cond, int step, numgrad::MlpTape* tape) {
  const std::vector<int> steps(noisy.cols(), step);
  return predict_noise(policy, noisy, cond, steps, tape);
}

nlohmann::ordered_json to_json(const DiffusionPolicy& policy) {
  nlohmann::ordered_json j = numgrad::to_json(numgrad::MlpCheckpoint{policy.net, policy.params});
  j["schedule"] = to_json(policy.schedule.config());
  j["horizons"] = {{"obs_steps", policy.horizons.obs_steps},
                   {"pred_steps", policy.horizons.pred_steps},
                   {"exec_steps", policy.horizons.exec_steps}};
  j["norm"] = {{"state", to_json(policy.state_norm)}, {"action", to_json(policy.action_norm)}};
  j["dims"] = {{"action_dim", policy.action_dim},
               {"state_dim", policy.state_dim},
               {"embed_dim", policy.embed_dim}};
  return j;
}

DiffusionPolicy policy_from_json(const nlohmann::ordered_json& j) {
  numgrad::MlpCheckpoint ckpt = numgrad::mlp_checkpoint_from_json(j);
  DiffusionPolicy p;
  p.net = ckpt.spec;
  p.params = std::move(ckpt.params);
  p.schedule = NoiseSchedule::make(schedule_config_from_json(j.at("schedule")));
  const auto& h = j.at("horizons");
  p.horizons = {h.at("obs_steps").get<int>(), h.at("pred_steps").get<int>(),
                h.at("exec_steps").get<int>()};
  const auto& d = j.at("dims");
  p.action_dim = d.at("action_dim").get<int>();
  p.state_dim = d.at("state_dim").get<int>();
  p.embed_dim = d.at("embed_dim").get<int>();
  p.state_norm = normalizer_from_json(j.at("norm").at("state"));
  p.action_norm = normalizer_from_json(j.at("norm").at("action"));
  p.validate();
  return p;
}

void save_policy(const std::filesystem::path& path, const DiffusionPolicy& policy,
                 const nlohmann::ordered_json& metadata) {
  nlohmann::ordered_json j = to_json(policy);
  for (const auto& [k, v] : metadata.items()) j[k] = v;
  numgrad::write_json_file(path, j);
}

DiffusionPolicy load_policy(const std::filesystem::path& path) {
  try {
    return policy_from_json(numgrad::read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid policy checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace fdpp::diffusion
