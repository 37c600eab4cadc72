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

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fdpp/common/rng.h"
#include "fdpp/diffusion/bc.h"
#include "fdpp/diffusion/sampler.h"
#include "fdpp/envs/trajectory.h"
#include "fdpp/finetune/metrics.h"
#include "fdpp/finetune/ppo.h"
#include "fdpp/finetune/rollout.h"
#include "fdpp/preference/reward.h"

namespace fdpp::finetune {
namespace {

using diffusion::DiffusionPolicy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const envs::EnvConfig kPush = envs::default_config(envs::EnvId::kPushBlock);

diffusion::PolicyConfig small_config() {
  diffusion::PolicyConfig cfg;
  cfg.hidden_dims = {64, 64};
  cfg.embed_dim = 8;
  cfg.schedule.stdev_floor = 0.3;
  return cfg;
}

// Briefly behavior-cloned push-block policy shared by the tests below.
const DiffusionPolicy& push_policy() {
  static const DiffusionPolicy policy = [] {
    std::vector<envs::Trajectory> demos;
    for (int i = 0; i < 20; ++i) demos.push_back(envs::run_expert_episode(kPush, 500 + i, i, 0.3));
    const auto [sn, an] = diffusion::fit_normalizers(demos);
    DiffusionPolicy p = diffusion::make_policy(small_config(), 2, 4, sn, an, 1);
    diffusion::BcConfig bc;
    bc.steps = 1500;
    bc.batch_size = 128;
    diffusion::train_bc(p, diffusion::make_windows(p, demos), bc);
    return p;
  }();
  return policy;
}

DiffusionPolicy perturbed(const DiffusionPolicy& p, double scale, std::uint64_t seed) {
  DiffusionPolicy q = p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& [name, t] : q.params) {
    for (double& v : t.data) v += normal(rng);
  }
  return q;
}

// Reward model with a fixed random network: only used as a deterministic
// state scorer.
const preference::RewardModel& push_reward() {
  static const preference::RewardModel model = [] {
    std::vector<envs::Trajectory> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back(envs::run_expert_episode(kPush, i, i, 0.5));
    auto records = preference::sample_pairs(corpus, kPush, 64, 1);
    for (auto& r : records) {
      r.label = preference::oracle_label(r.state_a, r.state_b, envs::FeatureId::kRegionOccupancy,
                                         kPush);
    }
    preference::RewardConfig cfg;
    cfg.hidden_dims = {16};
    cfg.epochs = 5;
    return preference::train_reward(records, envs::FeatureId::kRegionOccupancy, cfg);
  }();
  return model;
}

ChunkRewardFn chunk_reward(const preference::RewardModel& model, int count) {
  return [&model, count](std::span<const envs::State> states) {
    return preference::sequence_reward(model, states, count);
  };
}

TEST_CASE("whiten") {
  const std::vector<double> constant(5, 2.5);
  CHECK(whiten(constant).isZero(0.0));
  CHECK(whiten(std::vector<double>{7.0})(0) == 0.0);
  const std::vector<double> r{1.0, -2.0, 0.5, 4.0, 3.0};
  const VectorXd a = whiten(r);
  CHECK(std::abs(a.mean()) < 1e-15);
  CHECK(std::sqrt(a.array().square().mean()) == doctest::Approx(1.0).epsilon(1e-8));
  std::vector<double> affine;
  for (double v : r) affine.push_back(2.0 * v + 3.0);
  CHECK((whiten(affine) - a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_THROWS_AS(whiten(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("step KL closed form and Monte-Carlo agreement") {
  const DiffusionPolicy& p = push_policy();
  const DiffusionPolicy q = perturbed(p, 0.02, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  VectorXd cond(p.cond_dim());
  VectorXd x(p.sample_dim());
  for (int i = 0; i < cond.size(); ++i) cond(i) = 0.5 * normal(rng);
  for (int i = 0; i < x.size(); ++i) x(i) = normal(rng);
  const auto [k_from, k_to] = p.schedule.ddim_transitions()[3];

  CHECK(step_kl(p, p, cond, x, k_from, k_to) == 0.0);

  const VectorXd zero = VectorXd::Zero(x.size());
  const auto sp = diffusion::reverse_step(p, x, cond, k_from, k_to, zero);
  const auto sq = diffusion::reverse_step(q, x, cond, k_from, k_to, zero);
  const double closed = step_kl(q, p, cond, x, k_from, k_to);
  CHECK(closed == doctest::Approx((sq.mean - sp.mean).squaredNorm() / (2.0 * sp.stdev * sp.stdev))
                      .epsilon(1e-12));
  CHECK(closed > 0.0);

  // E_q[log q(x) - log p(x)] over samples of q's step.
  const int n = 100000;
  double sum = 0.0;
  double sq_sum = 0.0;
  VectorXd noise(x.size());
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < noise.size(); ++d) noise(d) = normal(rng);
    const VectorXd out = sq.mean + sq.stdev * noise;
    const double log_ratio = diffusion::gaussian_log_density(out, sq.mean, sq.stdev)(0) -
                             diffusion::gaussian_log_density(out, sp.mean, sp.stdev)(0);
    sum += log_ratio;
    sq_sum += log_ratio * log_ratio;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq_sum / n - mean * mean) / n);
  CHECK(std::abs(mean - closed) < 3.0 * se);

  diffusion::ScheduleConfig det = p.schedule.config();
  det.eta = 0.0;
  DiffusionPolicy deterministic = p;
  deterministic.schedule = diffusion::NoiseSchedule::make(det);
  CHECK_THROWS_AS(step_kl(deterministic, deterministic, cond, x, k_from, k_to),
                  std::invalid_argument);
}

TEST_CASE("collect_rollouts contracts") {
  const DiffusionPolicy& p = push_policy();
  const DiffusionPolicy q = perturbed(p, 0.01, 5);
  const auto& model = push_reward();
  const int ta = p.horizons.exec_steps;
  const RolloutBatch batch = collect_rollouts(q, &p, chunk_reward(model, ta), kPush, 8, 42);

  CHECK(batch.episodes.size() == 8);
  CHECK(batch.size() <= 8 * kPush.max_steps / ta);
  CHECK(batch.traces.size() == batch.size());
  CHECK(batch.traces.transitions.size() == p.schedule.ddim_transitions().size());
  for (const auto& tr : batch.episodes) CHECK(envs::replay_matches(tr, kPush));

  for (const auto& point : batch.points) {
    REQUIRE(static_cast<int>(point.executed.size()) == ta);
    const double recomputed = preference::sequence_reward(model, point.executed, ta);
    CHECK(std::abs(recomputed - point.reward) < 1e-12);
    CHECK(std::isfinite(point.reward));
    CHECK(point.t % ta == 0);
  }

  SUBCASE("fixed seed gives an identical batch") {
    const RolloutBatch again = collect_rollouts(q, &p, chunk_reward(model, ta), kPush, 8, 42);
    CHECK(again.traces.actions == batch.traces.actions);
    CHECK(again.traces.log_probs == batch.traces.log_probs);
    for (std::size_t i = 0; i < batch.points.size(); ++i) {
      CHECK(again.points[i].reward == batch.points[i].reward);
    }
  }
  SUBCASE("episodes do not depend on the batch they share") {
    const RolloutBatch fewer = collect_rollouts(q, &p, {}, kPush, 3, 42);
    for (int e = 0; e < 3; ++e) CHECK(fewer.episodes[e].states == batch.episodes[e].states);
  }
  SUBCASE("recomputed log-probs match the stored ones") {
    const auto steps = all_steps(batch);
    const VectorXd logp = recompute_log_probs(q, batch, steps);
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const double stored = batch.traces.log_probs[steps[j].step](steps[j].point);
      CHECK(std::abs(logp(static_cast<Eigen::Index>(j)) - stored) < 1e-10);
    }
    const VectorXd ref = recompute_log_probs(p, batch, steps);
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const double stored = batch.traces.ref_log_probs[steps[j].step](steps[j].point);
      CHECK(std::abs(ref(static_cast<Eigen::Index>(j)) - stored) < 1e-10);
    }
  }
  SUBCASE("mean trace KL is the average closed-form step KL") {
    double total = 0.0;
    int count = 0;
    for (int i = 0; i < batch.size(); ++i) {
      const diffusion::DenoisingTrace t = batch.traces.column(i);
      for (const auto& s : t.steps) {
        total += step_kl(q, p, t.cond, s.input, s.k_from, s.k_to);
        ++count;
      }
    }
    CHECK(mean_trace_kl(batch.traces) == doctest::Approx(total / count).epsilon(1e-10));
  }
}

TEST_CASE("first PPO minibatch is at the identity ratio") {
  const DiffusionPolicy& p = push_policy();
  const RolloutBatch batch = collect_rollouts(p, &p, chunk_reward(push_reward(), 4), kPush, 4, 7);
  VectorXd adv(batch.size());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int i = 0; i < adv.size(); ++i) adv(i) = normal(rng);
  const auto steps = all_steps(batch);
  const PpoLoss l = ppo_loss(p, batch, adv, steps, 0.05, 0.2);
  CHECK(l.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(l.clip_fraction == 0.0);
  CHECK(l.kl == 0.0);
  CHECK(l.clamped == 0);
  CHECK(l.surrogate == doctest::Approx(adv.mean()).epsilon(1e-10));
}

TEST_CASE("PPO loss gradient matches finite differences") {
  const DiffusionPolicy& ref = push_policy();
  const RolloutBatch batch = collect_rollouts(ref, &ref, chunk_reward(push_reward(), 4), kPush, 2, 9);
  DiffusionPolicy p = perturbed(ref, 0.0003, 10);
  VectorXd adv(batch.size());
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int i = 0; i < adv.size(); ++i) adv(i) = normal(rng);
  std::vector<StepRef> steps = all_steps(batch);
  steps.resize(std::min<std::size_t>(steps.size(), 40));
  const PpoLoss l = ppo_loss(p, batch, adv, steps, 0.5, 0.2);
  CHECK(l.clip_fraction == 0.0);
  const double h = 1e-6;
  int checked = 0;
  for (auto& [name, t] : p.params) {
    const auto& g = l.grads.at(name).data;
    for (std::size_t i = 0; i < t.data.size(); i += 97) {
      const double saved = t.data[i];
      t.data[i] = saved + h;
      const double up = ppo_loss(p, batch, adv, steps, 0.5, 0.2).loss;
      t.data[i] = saved - h;
      const double down = ppo_loss(p, batch, adv, steps, 0.5, 0.2).loss;
      t.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      INFO(name << "[" << i << "] fd " << fd << " analytic " << g[i]);
      CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max({std::abs(fd), std::abs(g[i]), 1e-3}));
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("score-function gradient matches the analytic Gaussian policy gradient") {
  // One denoising step from x^K to the action: a Gaussian policy whose mean is
  // an affine function of the network output.
  diffusion::PolicyConfig cfg;
  cfg.hidden_dims = {8};
  cfg.activation = numgrad::Activation::kTanh;
  cfg.embed_dim = 4;
  cfg.horizons = {.obs_steps = 0, .pred_steps = 1, .exec_steps = 1};
  cfg.schedule.train_steps = 10;
  cfg.schedule.ddim_steps = 1;
  cfg.schedule.stdev_floor = 0.5;
  const DiffusionPolicy p =
      perturbed(diffusion::make_policy(cfg, 2, 0, diffusion::Normalizer::identity(0),
                                       diffusion::Normalizer::identity(2), 3),
                0.3, 4);
  const int n = 10000;
  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = derive_seed(77, i);
  RolloutBatch batch;
  batch.traces = diffusion::sample_batch(p, MatrixXd(0, n), seeds, &p);
  batch.points.resize(n);
  const VectorXd target = (VectorXd(2) << 0.3, -0.2).finished();
  VectorXd rewards(n);
  for (int i = 0; i < n; ++i) {
    rewards(i) = -(batch.traces.outputs[0].col(i) - target).squaredNorm();
  }
  const VectorXd adv = rewards.array() - rewards.mean();
  const PpoLoss l = ppo_loss(p, batch, adv, all_steps(batch), 0.0, 0.2);

  // d E[r] / d mean = -2 (mean - target), pulled back through the network.
  const auto [k_from, k_to] = p.schedule.ddim_transitions()[0];
  const diffusion::StepCoefficients co = diffusion::step_coefficients(p.schedule, k_from, k_to);
  numgrad::MlpTape tape;
  const MatrixXd& x = batch.traces.inputs[0];
  diffusion::predict_noise(p, x, MatrixXd(0, n), k_from, &tape);
  const MatrixXd d_mean = -2.0 * (batch.traces.means[0].colwise() - target) / n;
  numgrad::ParamStore analytic = p.params.zeros_like();
  numgrad::backward_batch(p.net, p.params, tape, co.noise_coeff * d_mean, analytic);

  double dot = 0.0;
  double na = 0.0;
  double ne = 0.0;
  for (const auto& [name, t] : analytic) {
    const auto& est = l.grads.at(name).data;
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      // The loss gradient descends; the reward gradient ascends.
      dot += t.data[i] * -est[i];
      na += t.data[i] * t.data[i];
      ne += est[i] * est[i];
    }
  }
  const double angle = std::acos(dot / std::sqrt(na * ne)) * 180.0 / std::numbers::pi;
  INFO("angle " << angle << " deg");
  CHECK(angle < 5.0);
}

TEST_CASE("advantages are invariant to a constant reward offset") {
  const DiffusionPolicy& p = push_policy();
  const RolloutBatch batch = collect_rollouts(p, &p, chunk_reward(push_reward(), 4), kPush, 6, 12);
  RolloutBatch shifted = batch;
  for (auto& point : shifted.points) point.reward += 4.0 * 1.75;
  for (AdvantageMode mode : {AdvantageMode::kChunk, AdvantageMode::kReturn}) {
    const VectorXd a = raw_advantages(batch, mode, kPush.max_steps, 0.6);
    const VectorXd b = raw_advantages(shifted, mode, kPush.max_steps, 0.6);
    const VectorXd wa = whiten(std::span<const double>(a.data(), a.size()));
    const VectorXd wb = whiten(std::span<const double>(b.data(), b.size()));
    INFO(to_string(mode));
    CHECK((wa - wb).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("return advantages on a hand-built batch") {
  // Two episodes, chunks of 2 steps, horizon 6. Episode 0 runs t = 0, 2, 4;
  // episode 1 finishes after its chunk at t = 0 and is padded with two more
  // copies of that chunk's reward.
  RolloutBatch b;
  b.episodes.resize(2);
  const envs::State s = envs::reset(kPush, 0);
  auto point = [&](int ep, int t, double r) {
    DecisionPoint d;
    d.episode = ep;
    d.t = t;
    d.reward = r;
    d.executed = {s, s};
    return d;
  };
  b.points = {point(0, 0, 1.0), point(1, 0, 3.0), point(0, 2, 2.0), point(0, 4, 4.0)};
  const double g = 0.5;
  const VectorXd a = raw_advantages(b, AdvantageMode::kReturn, 6, g);
  const double ret00 = 1.0 + g * (2.0 + g * 4.0);
  const double ret10 = 3.0 * (1.0 + g + g * g);
  CHECK(a(0) == doctest::Approx(ret00 - 0.5 * (ret00 + ret10)));
  CHECK(a(1) == doctest::Approx(ret10 - 0.5 * (ret00 + ret10)));
  CHECK(a(2) == 0.0);
  CHECK(a(3) == 0.0);
  CHECK(raw_advantages(b, AdvantageMode::kChunk, 6, g) ==
        (VectorXd(4) << 1.0, 3.0, 2.0, 4.0).finished());
}

TEST_CASE("finetune loop bookkeeping") {
  const DiffusionPolicy& p = push_policy();
  FinetuneConfig cfg;
  cfg.iterations = 0;
  const DiffusionPolicy same = finetune_loop(p, push_reward(), kPush, cfg);
  CHECK(same.params == p.params);
  CHECK(same.schedule == p.schedule);

  cfg.iterations = 2;
  cfg.episodes = 2;
  int calls = 0;
  const DiffusionPolicy tuned = finetune_loop(p, push_reward(), kPush, cfg, [&](const IterationLog& log) {
    CHECK(log.iter == calls);
    CHECK(log.metrics.episodes == 2);
    CHECK(log.metrics.kl_mean.has_value());
    ++calls;
  });
  CHECK(calls == 2);
  CHECK_FALSE(tuned.params == p.params);
  CHECK(tuned.schedule.config().stdev_floor == cfg.stdev_floor);

  cfg.clip = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.discount = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(finetune_config_from_json(to_json(FinetuneConfig{})).learning_rate ==
        FinetuneConfig{}.learning_rate);
}

TEST_CASE("a dominant KL weight keeps the policy at its reference") {
  const DiffusionPolicy& p = push_policy();
  FinetuneConfig cfg;
  cfg.alpha = 1e4;
  cfg.iterations = 50;
  cfg.episodes = 4;
  cfg.learning_rate = 1e-4;
  double last_kl = 0.0;
  const DiffusionPolicy tuned = finetune_loop(p, push_reward(), kPush, cfg, [&](const IterationLog& log) {
    last_kl = log.ppo.kl;
    CHECK(log.ppo.kl < 1e-3);
  });
  CHECK(last_kl < 1e-3);
  const DiffusionPolicy reference = diffusion::with_stdev_floor(p, cfg.stdev_floor);
  const Metrics before = eval_policy(reference, kPush, 50, 123);
  const Metrics after = eval_policy(tuned, kPush, 50, 123);
  // Within two binomial standard errors of the reference success rate.
  const double se = std::sqrt(std::max(before.success_rate * (1.0 - before.success_rate), 0.01) / 50);
  CHECK(std::abs(after.success_rate - before.success_rate) <= 2.0 * std::sqrt(2.0) * se);
}

TEST_CASE("metrics") {
  SUBCASE("scripted expert as the evaluated policy") {
    std::vector<envs::Trajectory> runs;
    for (int i = 0; i < 100; ++i) runs.push_back(envs::run_expert_episode(kPush, episode_seed(9, i), i));
    const Metrics m = compute_metrics(runs, kPush);
    CHECK(m.success_rate >= 0.95);
    CHECK(m.rollout_len <= kPush.max_steps);
    CHECK(*m.constraint_satisfaction >= 0.0);
    CHECK(*m.constraint_satisfaction <= 1.0);
    CHECK_FALSE(m.displacement_avg.has_value());
  }
  SUBCASE("constraint ignores the grace window") {
    envs::Trajectory tr;
    envs::PushState s;
    s.block = {0.5, 0.5};
    s.pusher = {0.9, 0.1};  // inside R
    for (int t = 0; t < kPush.grace_steps; ++t) {
      s.t = t;
      tr.states.push_back(s);
    }
    s.pusher = {0.3, 0.3};
    s.t = kPush.grace_steps;
    tr.states.push_back(s);
    CHECK(satisfies_constraint(tr, kPush));
    s.pusher = {0.9, 0.1};
    ++s.t;
    tr.states.push_back(s);
    CHECK_FALSE(satisfies_constraint(tr, kPush));
  }
  SUBCASE("evaluation is deterministic and round-trips") {
    const Metrics a = eval_policy(push_policy(), kPush, 5, 31);
    const Metrics b = eval_policy(push_policy(), kPush, 5, 31);
    CHECK(to_json(a) == to_json(b));
    CHECK(to_json(metrics_from_json(to_json(a))) == to_json(a));
    CHECK(a.success_rate >= 0.0);
    CHECK(a.success_rate <= 1.0);
  }
}

}  // namespace
}  // namespace fdpp::finetune
