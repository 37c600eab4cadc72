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

#ifndef FDPP_PREFERENCE_RECORDS_H_
#define FDPP_PREFERENCE_RECORDS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fdpp/envs/env.h"
#include "fdpp/envs/scene.h"
#include "fdpp/envs/trajectory.h"
#include "json.hpp"

namespace fdpp::preference {

// Label values: which state of a pair is preferred.
inline constexpr int kPreferA = 0;
inline constexpr int kPreferB = 1;
inline constexpr int kEqual = -1;

struct PreferenceRecord {
  std::int64_t pair_id = 0;
  envs::State state_a;
  envs::State state_b;
  envs::SceneSpec scene_a;
  envs::SceneSpec scene_b;
  std::optional<int> label;  // kPreferA, kPreferB or kEqual
  std::string source;        // "oracle" or "human" once labeled
  std::int64_t timestamp = 0;

  bool operator==(const PreferenceRecord&) const = default;
};

// Throws std::invalid_argument for labels outside {-1, 0, 1}.
void check_label(int label);

nlohmann::ordered_json to_json(const PreferenceRecord& record);
PreferenceRecord record_from_json(const nlohmann::ordered_json& j);

void write_records(const std::filesystem::path& path,
                   const std::vector<PreferenceRecord>& records);
std::vector<PreferenceRecord> read_records(const std::filesystem::path& path);

// n unlabeled pairs of distinct visited states, drawn uniformly over all
// states of all trajectories. No unordered pair of states repeats within the
// result. pair_ids are 0..n-1.
std::vector<PreferenceRecord> sample_pairs(const std::vector<envs::Trajectory>& trajectories,
                                           const envs::EnvConfig& config, int n,
                                           std::uint64_t seed);

// Tie tolerance of the scalar oracle features.
double oracle_tie_tolerance(envs::FeatureId feature);

// Region occupancy prefers the state outside the region; scalar features
// prefer the smaller value. Ties give kEqual.
int oracle_label(const envs::State& a, const envs::State& b, envs::FeatureId feature,
                 const envs::EnvConfig& config);

// Counts per label value ("0", "1", "-1") plus "unlabeled".
std::map<std::string, int> label_histogram(const std::vector<PreferenceRecord>& records);

}  // namespace fdpp::preference

#endif  // FDPP_PREFERENCE_RECORDS_H_
