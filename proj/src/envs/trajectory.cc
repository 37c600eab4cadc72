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

#include "fdpp/envs/trajectory.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "fdpp/common/rng.h"

namespace fdpp::envs {

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory,
                            const EnvConfig& config) {
  const std::size_t n = trajectory.states.size();
  for (std::size_t t = 0; t < n; ++t) {
    nlohmann::ordered_json rec;
    rec["episode"] = trajectory.episode;
    rec["t"] = t;
    rec["state"] = to_json(trajectory.states[t]);
    rec["action"] = t < trajectory.actions.size() ? nlohmann::ordered_json(trajectory.actions[t])
                                                  : nlohmann::ordered_json(nullptr);
    if (!trajectory.labels.empty()) {
      rec["label"] = t < trajectory.labels.size() ? nlohmann::ordered_json(trajectory.labels[t])
                                                  : nlohmann::ordered_json(nullptr);
    }
    rec["done"] = t + 1 == n;
    rec["features"] = all_features(trajectory.states[t], config);
    out << rec.dump() << "\n";
  }
}

void write_trajectories(const std::filesystem::path& path,
                        const std::vector<Trajectory>& trajectories,
                        const EnvConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& traj : trajectories) write_trajectory_jsonl(out, traj, config);
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::ordered_json rec;
    try {
      rec = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto episode = rec.at("episode").get<std::uint64_t>();
    if (!open || out.back().episode != episode) {
      out.push_back(Trajectory{episode, {}, {}, {}});
      open = true;
    }
    auto& traj = out.back();
    traj.states.push_back(state_from_json(rec.at("state")));
    if (!rec.at("action").is_null()) {
      traj.actions.push_back(rec["action"].get<std::vector<double>>());
    }
    if (rec.contains("label") && !rec.at("label").is_null()) {
      traj.labels.push_back(rec["label"].get<std::vector<double>>());
    }
    if (rec.at("done").get<bool>()) open = false;
  }
  for (const auto& traj : out) {
    if (traj.states.size() != traj.actions.size() + 1 ||
        (!traj.labels.empty() && traj.labels.size() != traj.actions.size())) {
      throw std::runtime_error(path.string() + ": episode " + std::to_string(traj.episode) +
                               " is truncated");
    }
  }
  return out;
}

bool replay_matches(const Trajectory& trajectory, const EnvConfig& config) {
  State s = trajectory.states.front();
  for (std::size_t t = 0; t < trajectory.actions.size(); ++t) {
    s = step(s, trajectory.actions[t], config).state;
    if (!(s == trajectory.states[t + 1])) return false;
  }
  return true;
}

Trajectory run_episode(const EnvConfig& config, std::uint64_t episode_seed,
                       const ActionFn& policy, std::uint64_t episode_index) {
  Trajectory traj;
  traj.episode = episode_index;
  traj.states.push_back(reset(config, episode_seed));
  while (!is_terminal(traj.states.back(), config)) {
    auto action = policy(traj.states.back());
    StepResult r = step(traj.states.back(), action, config);
    traj.actions.push_back(std::move(action));
    traj.states.push_back(r.state);
  }
  return traj;
}

Trajectory run_expert_episode(const EnvConfig& config, std::uint64_t episode_seed,
                              std::uint64_t episode_index, double action_noise) {
  if (!(action_noise >= 0.0)) throw std::invalid_argument("action_noise must be >= 0");
  if (action_noise == 0.0) {
    return run_episode(
        config, episode_seed,
        [&](const State& s) { return scripted_expert(s, config, episode_seed); },
        episode_index);
  }
  auto rng = make_rng(episode_seed, /*stream=*/0xDA27);
  std::normal_distribution<double> normal(0.0, action_noise);
  std::vector<std::vector<double>> labels;
  Trajectory traj = run_episode(
      config, episode_seed,
      [&](const State& s) {
        std::vector<double> clean = scripted_expert(s, config, episode_seed);
        std::vector<double> noisy = clean;
        for (double& a : noisy) a = std::clamp(a + normal(rng), -1.0, 1.0);
        labels.push_back(std::move(clean));
        return noisy;
      },
      episode_index);
  traj.labels = std::move(labels);
  return traj;
}

}  // namespace fdpp::envs
