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

#ifndef FDPP_SERVICE_PIPELINE_H_
#define FDPP_SERVICE_PIPELINE_H_

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "fdpp/finetune/metrics.h"
#include "fdpp/preference/reward.h"
#include "fdpp/service/config.h"

namespace fdpp::service {

// File layout of a workspace directory.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path demos() const { return root / "demos.jsonl"; }
  std::filesystem::path policy() const { return root / "policy.json"; }
  std::filesystem::path bc_curve() const { return root / "bc_curve.jsonl"; }
  std::filesystem::path rollouts() const { return root / "rollouts.jsonl"; }
  std::filesystem::path pairs() const { return root / "pairs.jsonl"; }
  std::filesystem::path labels() const { return root / "labels.jsonl"; }
  std::filesystem::path reward() const { return root / "reward.json"; }
  std::filesystem::path finetuned() const { return root / "finetuned.json"; }
  std::filesystem::path finetune_log() const { return root / "finetune_log.jsonl"; }
  std::filesystem::path eval_pretrained() const { return root / "eval_pretrained.json"; }
  std::filesystem::path eval_finetuned() const { return root / "eval_finetuned.json"; }
};

// Writes <workspace>/config.json.
void write_run_config(const RunConfig& config);

// Records `artifact` (a file inside the workspace) in manifest.json with its
// SHA-256 and the producing config hash and seed. JSONL artifacts carry their
// provenance here; JSON artifacts additionally embed it under "meta".
void record_artifact(const RunConfig& config, const std::filesystem::path& artifact);

// Scripted demos, normalizers and BC training: demos.jsonl, policy.json,
// bc_curve.jsonl. Returns the final logged BC loss.
double run_pretrain(const RunConfig& config, std::ostream& log);

// `n` (default config.rollouts) episodes of policy.json -> rollouts.jsonl.
void run_rollout(const RunConfig& config, std::ostream& log, std::optional<int> n = {});

// config.pairs unlabeled pairs from rollouts.jsonl -> pairs.jsonl.
void run_pairs(const RunConfig& config, std::ostream& log);

// Oracle labels for every pair of pairs.jsonl -> labels.jsonl. Returns the
// label histogram.
std::map<std::string, int> run_label_auto(const RunConfig& config, std::ostream& log);

// labels.jsonl -> reward.json.
preference::RewardReport run_reward_train(const RunConfig& config, std::ostream& log);

// policy.json + reward.json -> finetuned.json, finetune_log.jsonl.
void run_finetune(const RunConfig& config, std::ostream& log);

// Evaluates a policy checkpoint over config.eval_episodes episodes with the
// eval-stage seed and writes a metrics report to `out`. `stdev_floor`
// overrides the checkpoint's sampler floor.
finetune::Metrics run_eval(const RunConfig& config, const std::filesystem::path& policy_path,
                           const std::filesystem::path& out, std::optional<double> stdev_floor,
                           std::ostream& log);

// All stages with oracle labels, then both evaluations (the pre-trained one
// under the fine-tuning sampler floor).
void run_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace fdpp::service

#endif  // FDPP_SERVICE_PIPELINE_H_
