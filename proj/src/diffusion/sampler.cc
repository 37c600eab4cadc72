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

#include "fdpp/diffusion/sampler.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fdpp/common/rng.h"

namespace fdpp::diffusion {
namespace {

constexpr std::uint64_t kChainStream = 0xD1FF;

void check_step(const NoiseSchedule& schedule, int k) {
  if (k < 1 || k > schedule.train_steps()) {
    throw std::invalid_argument("diffusion step " + std::to_string(k) + " outside 1.." +
                                std::to_string(schedule.train_steps()));
  }
}

void check_same_size(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

// Independent standard-normal streams, one per chain.
class ChainNoise {
 public:
  explicit ChainNoise(std::span<const std::uint64_t> seeds) {
    rngs_.reserve(seeds.size());
    for (std::uint64_t s : seeds) rngs_.push_back(make_rng(s, kChainStream));
    normals_.resize(seeds.size());
  }

  Eigen::MatrixXd draw(int rows) {
    Eigen::MatrixXd z(rows, static_cast<Eigen::Index>(rngs_.size()));
    for (std::size_t c = 0; c < rngs_.size(); ++c) {
      for (int r = 0; r < rows; ++r) z(r, c) = normals_[c](rngs_[c]);
    }
    return z;
  }

 private:
  std::vector<std::mt19937_64> rngs_;
  std::vector<std::normal_distribution<double>> normals_;
};

Eigen::MatrixXd step_means(const DiffusionPolicy& policy, const StepCoefficients& co,
                           const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond) {
  const Eigen::MatrixXd eps = predict_noise(policy, x, cond, co.k_from);
  return co.input_coeff * x + co.noise_coeff * eps;
}

Eigen::MatrixXd empty_cond(const DiffusionPolicy& policy, Eigen::Index n) {
  return Eigen::MatrixXd(policy.cond_dim(), policy.cond_dim() > 0 ? n : 0);
}

}  // namespace

Eigen::VectorXd forward_sample(const NoiseSchedule& schedule, const Eigen::VectorXd& x0, int k,
                               const Eigen::VectorXd& noise) {
  check_step(schedule, k);
  check_same_size(x0, noise, "forward_sample");
  const double ab = schedule.alpha_bar(k);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

Eigen::VectorXd posterior_mean(const NoiseSchedule& schedule, const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& xk, int k) {
  check_step(schedule, k);
  check_same_size(x0, xk, "posterior_mean");
  const double ab = schedule.alpha_bar(k);
  const double ab_prev = schedule.alpha_bar(k - 1);
  const double beta = schedule.beta(k);
  const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
  const double ck = std::sqrt(schedule.alpha(k)) * (1.0 - ab_prev) / (1.0 - ab);
  return c0 * x0 + ck * xk;
}

Eigen::VectorXd predict_clean(const NoiseSchedule& schedule, const Eigen::VectorXd& xk, int k,
                              const Eigen::VectorXd& eps_hat) {
  check_step(schedule, k);
  check_same_size(xk, eps_hat, "predict_clean");
  const double ab = schedule.alpha_bar(k);
  return (xk - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

StepCoefficients step_coefficients(const NoiseSchedule& schedule, int k_from, int k_to) {
  check_step(schedule, k_from);
  bool adjacent = k_to == k_from - 1;
  if (!adjacent) {
    const auto& tau = schedule.ddim_timesteps();
    const auto it = std::find(tau.begin(), tau.end(), k_from);
    if (it != tau.end()) adjacent = k_to == (it == tau.begin() ? 0 : *(it - 1));
  }
  if (!adjacent) {
    throw std::invalid_argument("reverse step " + std::to_string(k_from) + " -> " +
                                std::to_string(k_to) + " is not adjacent in the schedule");
  }
  const double ab_from = schedule.alpha_bar(k_from);
  const double ab_to = schedule.alpha_bar(k_to);
  const double raw = schedule.ddim_raw_stdev(k_from, k_to);
  const double direction = std::sqrt(std::max(0.0, 1.0 - ab_to - raw * raw));
  const double clean_scale = std::sqrt(ab_to / ab_from);
  StepCoefficients co;
  co.k_from = k_from;
  co.k_to = k_to;
  co.input_coeff = clean_scale;
  co.noise_coeff = direction - clean_scale * std::sqrt(1.0 - ab_from);
  co.stdev = schedule.ddim_stdev(k_from, k_to);
  return co;
}

StepResult reverse_step_from_prediction(const NoiseSchedule& schedule, const Eigen::VectorXd& xk,
                                        const Eigen::VectorXd& eps_hat, int k_from, int k_to,
                                        const Eigen::VectorXd& noise) {
  check_same_size(xk, eps_hat, "reverse_step");
  check_same_size(xk, noise, "reverse_step");
  const StepCoefficients co = step_coefficients(schedule, k_from, k_to);
  StepResult r;
  r.mean = co.input_coeff * xk + co.noise_coeff * eps_hat;
  r.stdev = co.stdev;
  r.output = r.mean + r.stdev * noise;
  return r;
}

StepResult reverse_step(const DiffusionPolicy& policy, const Eigen::VectorXd& xk,
                        const Eigen::VectorXd& cond, int k_from, int k_to,
                        const Eigen::VectorXd& noise) {
  const Eigen::MatrixXd eps = predict_noise(policy, xk, cond, k_from);
  return reverse_step_from_prediction(policy.schedule, xk, eps.col(0), k_from, k_to, noise);
}

Eigen::VectorXd gaussian_log_density(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mean,
                                     double stdev) {
  if (x.rows() != mean.rows() || x.cols() != mean.cols()) {
    throw std::invalid_argument("gaussian_log_density: shape mismatch");
  }
  if (!(stdev > 0.0)) throw std::invalid_argument("gaussian_log_density: stdev must be > 0");
  const double norm = -static_cast<double>(x.rows()) *
                      (std::log(stdev) + 0.5 * std::log(2.0 * std::numbers::pi));
  const Eigen::VectorXd sq = ((x - mean) / stdev).colwise().squaredNorm().transpose();
  return (-0.5 * sq).array() + norm;
}

DenoisingTrace BatchTrace::column(int c) const {
  DenoisingTrace t;
  if (cond.rows() > 0) t.cond = cond.col(c);
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    DenoisingStep s;
    s.k_from = transitions[i].first;
    s.k_to = transitions[i].second;
    s.input = inputs[i].col(c);
    s.output = outputs[i].col(c);
    s.mean = means[i].col(c);
    s.stdev = stdevs[i];
    s.log_prob = log_probs[i](c);
    s.ref_log_prob = ref_log_probs[i](c);
    s.ref_mean = ref_means[i].col(c);
    t.steps.push_back(std::move(s));
  }
  t.actions = actions.col(c);
  return t;
}

BatchTrace sample_batch(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                        std::span<const std::uint64_t> seeds, const DiffusionPolicy* reference) {
  const auto n = static_cast<Eigen::Index>(seeds.size());
  if (policy.cond_dim() > 0 && cond.cols() != n) {
    throw std::invalid_argument("sample_batch: one seed per conditioning column required");
  }
  if (reference != nullptr &&
      (!(reference->schedule == policy.schedule) || reference->net != policy.net ||
       reference->horizons != policy.horizons)) {
    throw std::invalid_argument("sample_batch: reference policy has a different layout");
  }
  BatchTrace trace;
  trace.cond = policy.cond_dim() > 0 ? cond : empty_cond(policy, n);
  trace.transitions = policy.schedule.ddim_transitions();
  ChainNoise noise(seeds);
  Eigen::MatrixXd x = noise.draw(policy.sample_dim());
  for (const auto& [k_from, k_to] : trace.transitions) {
    const StepCoefficients co = step_coefficients(policy.schedule, k_from, k_to);
    Eigen::MatrixXd mean = step_means(policy, co, x, trace.cond);
    Eigen::MatrixXd out = mean + co.stdev * noise.draw(policy.sample_dim());
    // A deterministic step (eta = 0) has no density; its log-probs are 0.
    const auto log_density = [&](const Eigen::MatrixXd& m) -> Eigen::VectorXd {
      if (co.stdev == 0.0) return Eigen::VectorXd::Zero(n);
      return gaussian_log_density(out, m, co.stdev);
    };
    trace.log_probs.push_back(log_density(mean));
    if (reference != nullptr) {
      Eigen::MatrixXd ref_mean = step_means(*reference, co, x, trace.cond);
      trace.ref_log_probs.push_back(log_density(ref_mean));
      trace.ref_means.push_back(std::move(ref_mean));
    } else {
      trace.ref_log_probs.push_back(trace.log_probs.back());
      trace.ref_means.push_back(mean);
    }
    trace.inputs.push_back(std::move(x));
    trace.means.push_back(std::move(mean));
    trace.stdevs.push_back(co.stdev);
    x = out;
    trace.outputs.push_back(std::move(out));
  }
  trace.actions = x.cwiseMax(-1.0).cwiseMin(1.0);
  return trace;
}

DenoisingTrace sample_action_sequence(const DiffusionPolicy& policy, const Eigen::VectorXd& cond,
                                      std::uint64_t seed, const DiffusionPolicy* reference) {
  if (cond.size() != policy.cond_dim()) {
    throw std::invalid_argument("sample_action_sequence: conditioning has wrong length");
  }
  const std::uint64_t seeds[] = {seed};
  return sample_batch(policy, cond, seeds, reference).column(0);
}

Eigen::MatrixXd sample_ddpm(const DiffusionPolicy& policy, const Eigen::MatrixXd& cond,
                            std::span<const std::uint64_t> seeds) {
  const auto n = static_cast<Eigen::Index>(seeds.size());
  const Eigen::MatrixXd c = policy.cond_dim() > 0 ? cond : empty_cond(policy, n);
  if (policy.cond_dim() > 0 && cond.cols() != n) {
    throw std::invalid_argument("sample_ddpm: one seed per conditioning column required");
  }
  const NoiseSchedule& s = policy.schedule;
  ChainNoise noise(seeds);
  Eigen::MatrixXd x = noise.draw(policy.sample_dim());
  for (int k = s.train_steps(); k >= 1; --k) {
    const Eigen::MatrixXd eps = predict_noise(policy, x, c, k);
    const double ab = s.alpha_bar(k);
    const Eigen::MatrixXd clean = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    Eigen::MatrixXd next(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      next.col(j) = posterior_mean(s, clean.col(j), x.col(j), k);
    }
    x = next + std::sqrt(s.posterior_variance(k)) * noise.draw(policy.sample_dim());
  }
  return x;
}

Eigen::VectorXd condition_from_states(const DiffusionPolicy& policy,
                                      std::span<const std::vector<double>> recent_states) {
  const int ts = policy.horizons.obs_steps;
  Eigen::VectorXd cond(policy.cond_dim());
  if (ts == 0) return cond;
  if (recent_states.empty()) throw std::invalid_argument("act: at least one state required");
  const auto available = static_cast<int>(recent_states.size());
  for (int i = 0; i < ts; ++i) {
    // Slot i holds the state (ts - 1 - i) steps before the latest.
    const int idx = std::max(0, available - ts + i);
    const std::vector<double> z = policy.state_norm.normalize(recent_states[idx]);
    for (int d = 0; d < policy.state_dim; ++d) cond(i * policy.state_dim + d) = z[d];
  }
  return cond;
}

std::vector<std::vector<double>> actions_from_sample(const DiffusionPolicy& policy,
                                                     const Eigen::VectorXd& sample) {
  if (sample.size() != policy.sample_dim()) {
    throw std::invalid_argument("actions_from_sample: wrong sample length");
  }
  std::vector<std::vector<double>> out;
  const int a = policy.action_dim;
  for (int t = 0; t < policy.horizons.exec_steps; ++t) {
    out.push_back(policy.action_norm.denormalize(
        std::span<const double>(sample.data() + static_cast<std::ptrdiff_t>(t) * a, a)));
  }
  return out;
}

std::vector<std::vector<double>> act(const DiffusionPolicy& policy,
                                     std::span<const std::vector<double>> recent_states,
                                     std::uint64_t seed) {
  const Eigen::VectorXd cond = condition_from_states(policy, recent_states);
  return actions_from_sample(policy, sample_action_sequence(policy, cond, seed).actions);
}

}  // namespace fdpp::diffusion
