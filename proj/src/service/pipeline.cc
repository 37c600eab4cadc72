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

#include "fdpp/service/pipeline.h"

#include <fstream>
#include <stdexcept>

#include "fdpp/common/rng.h"
#include "fdpp/diffusion/bc.h"
#include "fdpp/envs/trajectory.h"
#include "fdpp/finetune/ppo.h"
#include "fdpp/finetune/rollout.h"
#include "fdpp/numgrad/checkpoint.h"
#include "fdpp/preference/records.h"

namespace fdpp::service {
namespace {

Workspace workspace_of(const RunConfig& config) { return Workspace{config.workspace}; }

void require(const std::filesystem::path& path, const char* producer) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("missing " + path.string() + " (run `fdpp " + producer + "` first)");
  }
}

std::ofstream open_jsonl(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_run_config(const RunConfig& config) {
  nlohmann::ordered_json j = to_json(config);
  j["config_hash"] = config_hash(config);
  numgrad::write_json_file(workspace_of(config).config(), j);
}

void record_artifact(const RunConfig& config, const std::filesystem::path& artifact) {
  const Workspace ws = workspace_of(config);
  nlohmann::ordered_json manifest = std::filesystem::exists(ws.manifest())
                                        ? numgrad::read_json_file(ws.manifest())
                                        : nlohmann::ordered_json::object();
  manifest[artifact.filename().string()] = {{"sha256", file_sha256(artifact)},
                                            {"config_hash", config_hash(config)},
                                            {"seed", config.seed}};
  numgrad::write_json_file(ws.manifest(), manifest);
}

double run_pretrain(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Workspace ws = workspace_of(config);
  std::filesystem::create_directories(ws.root);
  write_run_config(config);

  const std::uint64_t demo_seed = stage_seed(config, Stage::kDemos);
  std::vector<envs::Trajectory> demos;
  demos.reserve(config.demos);
  for (int i = 0; i < config.demos; ++i) {
    demos.push_back(envs::run_expert_episode(config.env, derive_seed(demo_seed, i), i,
                                             config.demo_noise));
  }
  envs::write_trajectories(ws.demos(), demos, config.env);
  record_artifact(config, ws.demos());
  log << "demos: " << demos.size() << " episodes -> " << ws.demos().string() << "\n";

  auto [state_norm, action_norm] = diffusion::fit_normalizers(demos);
  diffusion::DiffusionPolicy policy = diffusion::make_policy(
      config.policy, envs::action_dim(config.env.id), envs::observation_dim(config.env.id),
      std::move(state_norm), std::move(action_norm), stage_seed(config, Stage::kPolicyInit));
  const diffusion::WindowDataset windows = diffusion::make_windows(policy, demos);
  diffusion::BcConfig bc = config.bc;
  bc.seed = stage_seed(config, Stage::kBc);

  std::ofstream curve = open_jsonl(ws.bc_curve());
  double last_loss = 0.0;
  diffusion::train_bc(policy, windows, bc, [&](const diffusion::BcLogEntry& e) {
    curve << nlohmann::ordered_json{{"step", e.step}, {"loss", e.loss}}.dump() << "\n";
    last_loss = e.loss;
    if (e.step % (50 * std::max(1, bc.log_every)) == 0) {
      log << "bc step " << e.step << " loss " << e.loss << "\n";
    }
  });
  curve.close();
  record_artifact(config, ws.bc_curve());
  diffusion::save_policy(ws.policy(), policy, {{"meta", artifact_meta(config)}});
  record_artifact(config, ws.policy());
  log << "policy -> " << ws.policy().string() << " (final loss " << last_loss << ")\n";
  return last_loss;
}

void run_rollout(const RunConfig& config, std::ostream& log, std::optional<int> n) {
  config.validate();
  const Workspace ws = workspace_of(config);
  require(ws.policy(), "pretrain");
  const int episodes = n.value_or(config.rollouts);
  if (episodes < 1) throw std::invalid_argument("rollout count must be positive");
  const diffusion::DiffusionPolicy policy = diffusion::load_policy(ws.policy());
  std::vector<envs::Trajectory> trajectories;
  const finetune::Metrics m = finetune::eval_policy(
      policy, config.env, episodes, stage_seed(config, Stage::kRollouts), &trajectories);
  envs::write_trajectories(ws.rollouts(), trajectories, config.env);
  record_artifact(config, ws.rollouts());
  log << "rollouts: " << episodes << " episodes (success " << m.success_rate << ") -> "
      << ws.rollouts().string() << "\n";
}

void run_pairs(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Workspace ws = workspace_of(config);
  require(ws.rollouts(), "rollout");
  const auto trajectories = envs::read_trajectories(ws.rollouts());
  const auto records = preference::sample_pairs(trajectories, config.env, config.pairs,
                                                stage_seed(config, Stage::kPairs));
  preference::write_records(ws.pairs(), records);
  record_artifact(config, ws.pairs());
  log << "pairs: " << records.size() << " -> " << ws.pairs().string() << "\n";
}

std::map<std::string, int> run_label_auto(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Workspace ws = workspace_of(config);
  require(ws.pairs(), "pairs");
  auto records = preference::read_records(ws.pairs());
  for (auto& r : records) {
    r.label = preference::oracle_label(r.state_a, r.state_b, config.feature, config.env);
    r.source = "oracle";
    r.timestamp = 0;
  }
  preference::write_records(ws.labels(), records);
  record_artifact(config, ws.labels());
  const auto histogram = preference::label_histogram(records);
  log << "labels:";
  for (const auto& [label, count] : histogram) log << " " << label << "=" << count;
  log << " -> " << ws.labels().string() << "\n";
  return histogram;
}

preference::RewardReport run_reward_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Workspace ws = workspace_of(config);
  require(ws.labels(), "label-auto` or `fdpp label-serve");
  preference::RewardConfig rc = config.reward;
  rc.seed = stage_seed(config, Stage::kReward);
  preference::RewardReport report;
  const preference::RewardModel model =
      preference::train_reward(preference::read_records(ws.labels()), config.feature, rc, &report);
  preference::save_reward(ws.reward(), model,
                          {{"meta", artifact_meta(config)}, {"report", to_json(report)}});
  record_artifact(config, ws.reward());
  log << "reward: train acc " << report.train_accuracy << ", holdout acc "
      << report.holdout_accuracy << " -> " << ws.reward().string() << "\n";
  return report;
}

void run_finetune(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Workspace ws = workspace_of(config);
  require(ws.policy(), "pretrain");
  require(ws.reward(), "reward-train");
  const diffusion::DiffusionPolicy pretrained = diffusion::load_policy(ws.policy());
  const preference::RewardModel reward = preference::load_reward(ws.reward());
  finetune::FinetuneConfig fc = config.finetune;
  fc.seed = stage_seed(config, Stage::kFinetune);

  std::ofstream iter_log = open_jsonl(ws.finetune_log());
  const diffusion::DiffusionPolicy tuned =
      finetune::finetune_loop(pretrained, reward, config.env, fc, [&](const auto& entry) {
        iter_log << finetune::to_json(entry).dump() << "\n";
        iter_log.flush();
        if (entry.iter % 10 == 0 || entry.iter + 1 == fc.iterations) {
          log << "finetune iter " << entry.iter << " success " << entry.metrics.success_rate
              << " kl " << entry.metrics.kl_mean.value_or(0.0) << "\n";
        }
      });
  iter_log.close();
  record_artifact(config, ws.finetune_log());
  diffusion::save_policy(ws.finetuned(), tuned, {{"meta", artifact_meta(config)}});
  record_artifact(config, ws.finetuned());
  log << "finetuned -> " << ws.finetuned().string() << "\n";
}

finetune::Metrics run_eval(const RunConfig& config, const std::filesystem::path& policy_path,
                           const std::filesystem::path& out, std::optional<double> stdev_floor,
                           std::ostream& log) {
  config.validate();
  if (!std::filesystem::exists(policy_path)) {
    throw std::runtime_error("missing policy checkpoint " + policy_path.string());
  }
  diffusion::DiffusionPolicy policy = diffusion::load_policy(policy_path);
  if (stdev_floor) policy = diffusion::with_stdev_floor(std::move(policy), *stdev_floor);
  const finetune::Metrics m = finetune::eval_policy(policy, config.env, config.eval_episodes,
                                                    stage_seed(config, Stage::kEval));
  nlohmann::ordered_json report;
  report["meta"] = artifact_meta(config);
  report["policy"] = policy_path.filename().string();
  report["policy_sha256"] = file_sha256(policy_path);
  report["stdev_floor"] = policy.schedule.config().stdev_floor;
  report["metrics"] = finetune::to_json(m);
  numgrad::write_json_file(out, report);
  if (std::filesystem::weakly_canonical(out).parent_path() ==
      std::filesystem::weakly_canonical(config.workspace)) {
    record_artifact(config, out);
  }
  log << "eval " << policy_path.filename().string() << ": " << finetune::to_json(m).dump()
      << "\n";
  return m;
}

void run_pipeline(const RunConfig& config, std::ostream& log) {
  const Workspace ws = workspace_of(config);
  run_pretrain(config, log);
  run_rollout(config, log);
  run_pairs(config, log);
  run_label_auto(config, log);
  run_reward_train(config, log);
  run_finetune(config, log);
  const std::optional<double> floor =
      config.finetune.stdev_floor > 0.0 ? std::optional<double>(config.finetune.stdev_floor)
                                        : std::nullopt;
  run_eval(config, ws.policy(), ws.eval_pretrained(), floor, log);
  run_eval(config, ws.finetuned(), ws.eval_finetuned(), std::nullopt, log);
}

}  // namespace fdpp::service
