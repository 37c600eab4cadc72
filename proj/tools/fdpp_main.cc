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

// fdpp: command-line driver for the preference-alignment pipeline.
//
//   fdpp pretrain --env push-block --demos 200 --out ws/
//   fdpp rollout --out ws/ && fdpp pairs --out ws/ && fdpp label-auto --out ws/
//   fdpp reward-train --out ws/ && fdpp finetune --out ws/ --alpha 0.05
//   fdpp eval --out ws/ --policy ws/finetuned.json
//   fdpp pipeline --config run.json
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "fdpp/numgrad/checkpoint.h"
#include "fdpp/preference/records.h"
#include "fdpp/service/config.h"
#include "fdpp/service/label_server.h"
#include "fdpp/service/label_session.h"
#include "fdpp/service/pipeline.h"

namespace {

using fdpp::service::RunConfig;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Flags shared by every subcommand; unset optionals leave the config alone.
struct Overrides {
  std::string config_path;
  std::string workspace = "ws";
  std::optional<std::string> env;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> feature;
  std::optional<int> demos;
  std::optional<double> demo_noise;
  std::optional<int> bc_steps;
  std::optional<int> pairs;
  std::optional<int> reward_epochs;
  std::optional<double> alpha;
  std::optional<int> iterations;
  std::optional<double> learning_rate;
  std::optional<int> episodes;
  std::optional<int> eval_episodes;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Run configuration JSON");
  cmd->add_option("--out,--workspace", o.workspace, "Workspace directory")->capture_default_str();
  cmd->add_option("--env", o.env, "push-block or place-align");
  cmd->add_option("--seed", o.seed, "Global seed");
  cmd->add_option("--feature", o.feature, "region_occupancy, displacement or misalignment");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  const std::filesystem::path ws_config = std::filesystem::path(o.workspace) / "config.json";
  if (!o.config_path.empty()) {
    c = fdpp::service::run_config_from_json(fdpp::numgrad::read_json_file(o.config_path));
  } else if (std::filesystem::exists(ws_config)) {
    c = fdpp::service::run_config_from_json(fdpp::numgrad::read_json_file(ws_config));
  } else {
    c = fdpp::service::default_run_config(
        fdpp::envs::env_id_from_string(o.env.value_or("push-block")));
  }
  if (o.env && fdpp::envs::env_id_from_string(*o.env) != c.env.id) {
    throw std::invalid_argument("--env " + *o.env + " contradicts the configured env " +
                                fdpp::envs::to_string(c.env.id));
  }
  c.workspace = o.workspace;
  if (o.seed) c.seed = *o.seed;
  if (o.feature) c.feature = fdpp::envs::feature_id_from_string(*o.feature);
  if (o.demos) c.demos = *o.demos;
  if (o.demo_noise) c.demo_noise = *o.demo_noise;
  if (o.bc_steps) c.bc.steps = *o.bc_steps;
  if (o.pairs) c.pairs = *o.pairs;
  if (o.reward_epochs) c.reward.epochs = *o.reward_epochs;
  if (o.alpha) c.finetune.alpha = *o.alpha;
  if (o.iterations) c.finetune.iterations = *o.iterations;
  if (o.learning_rate) c.finetune.learning_rate = *o.learning_rate;
  if (o.episodes) c.finetune.episodes = *o.episodes;
  if (o.eval_episodes) c.eval_episodes = *o.eval_episodes;
  c.validate();
  return c;
}

fdpp::service::LabelServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int serve_labels(const RunConfig& config, const std::string& host, int port,
                 const std::string& static_dir) {
  const fdpp::service::Workspace ws{config.workspace};
  if (!std::filesystem::exists(ws.pairs())) {
    throw std::runtime_error("missing " + ws.pairs().string() + " (run `fdpp pairs` first)");
  }
  fdpp::service::LabelSession session(fdpp::preference::read_records(ws.pairs()), ws.labels());
  fdpp::service::LabelServer server(
      session, static_dir.empty() ? std::nullopt
                                  : std::optional<std::filesystem::path>(static_dir));
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  const auto counts = session.counts();
  std::cerr << "labeling " << counts.remaining << " of " << counts.total << " pairs at http://"
            << host << ":" << bound << " (log " << session.log_path().string() << ")\n";
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-aligned diffusion policy pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* pretrain = app.add_subcommand("pretrain", "Scripted demos and behavior cloning");
  add_common(pretrain, o);
  pretrain->add_option("--demos", o.demos, "Demo episodes");
  pretrain->add_option("--demo-noise", o.demo_noise, "Executed-action noise of the demos");
  pretrain->add_option("--bc-steps", o.bc_steps, "BC optimizer steps");

  auto* rollout = app.add_subcommand("rollout", "Roll out the pre-trained policy");
  add_common(rollout, o);
  std::optional<int> rollout_n;
  rollout->add_option("--n", rollout_n, "Episodes");

  auto* pairs = app.add_subcommand("pairs", "Sample unlabeled state pairs from the rollouts");
  add_common(pairs, o);
  pairs->add_option("--n", o.pairs, "Pairs");

  auto* serve = app.add_subcommand("label-serve", "HTTP labeling service");
  add_common(serve, o);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--static", static_dir, "Built UI assets to serve from /");

  auto* label_auto = app.add_subcommand("label-auto", "Label every pair with the feature oracle");
  add_common(label_auto, o);

  auto* reward = app.add_subcommand("reward-train", "Fit the reward model to the labels");
  add_common(reward, o);
  reward->add_option("--epochs", o.reward_epochs);

  auto* tune = app.add_subcommand("finetune", "Reward-guided fine-tuning");
  add_common(tune, o);
  tune->add_option("--alpha", o.alpha, "KL weight");
  tune->add_option("--iterations", o.iterations);
  tune->add_option("--lr", o.learning_rate);
  tune->add_option("--episodes", o.episodes, "Episodes per iteration");

  auto* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  add_common(eval, o);
  std::string eval_policy;
  std::string eval_out;
  std::optional<double> eval_floor;
  eval->add_option("--policy", eval_policy, "Checkpoint (default <workspace>/policy.json)");
  eval->add_option("--report", eval_out, "Metrics JSON (default <workspace>/eval_<name>.json)");
  eval->add_option("--episodes", o.eval_episodes);
  eval->add_option("--stdev-floor", eval_floor, "Override the sampler stdev floor");

  auto* pipeline = app.add_subcommand("pipeline", "All stages with oracle labels");
  add_common(pipeline, o);
  pipeline->add_option("--demos", o.demos);
  pipeline->add_option("--bc-steps", o.bc_steps);
  pipeline->add_option("--alpha", o.alpha);
  pipeline->add_option("--iterations", o.iterations);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const RunConfig config = resolve(o);
    std::ostream& log = std::cerr;
    if (pretrain->parsed()) {
      fdpp::service::run_pretrain(config, log);
    } else if (rollout->parsed()) {
      fdpp::service::run_rollout(config, log, rollout_n);
    } else if (pairs->parsed()) {
      fdpp::service::run_pairs(config, log);
    } else if (serve->parsed()) {
      return serve_labels(config, host, port, static_dir);
    } else if (label_auto->parsed()) {
      fdpp::service::run_label_auto(config, log);
    } else if (reward->parsed()) {
      fdpp::service::run_reward_train(config, log);
    } else if (tune->parsed()) {
      fdpp::service::run_finetune(config, log);
    } else if (eval->parsed()) {
      const fdpp::service::Workspace ws{config.workspace};
      const std::filesystem::path policy = eval_policy.empty() ? ws.policy() : std::filesystem::path(eval_policy);
      const std::filesystem::path out =
          eval_out.empty() ? ws.root / ("eval_" + policy.stem().string() + ".json") : std::filesystem::path(eval_out);
      const auto metrics = fdpp::service::run_eval(config, policy, out, eval_floor, log);
      std::cout << fdpp::finetune::to_json(metrics).dump(2) << "\n";
    } else if (pipeline->parsed()) {
      fdpp::service::run_pipeline(config, log);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
