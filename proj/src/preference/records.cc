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

#include "fdpp/preference/records.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "fdpp/common/rng.h"

namespace fdpp::preference {

void check_label(int label) {
  if (label != kPreferA && label != kPreferB && label != kEqual) {
    throw std::invalid_argument("label must be -1, 0 or 1, got " + std::to_string(label));
  }
}

nlohmann::ordered_json to_json(const PreferenceRecord& r) {
  nlohmann::ordered_json j;
  j["pair_id"] = r.pair_id;
  j["state_a"] = envs::to_json(r.state_a);
  j["state_b"] = envs::to_json(r.state_b);
  j["scene_a"] = envs::to_json(r.scene_a);
  j["scene_b"] = envs::to_json(r.scene_b);
  j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nlohmann::ordered_json(nullptr);
  j["source"] = r.label ? nlohmann::ordered_json(r.source) : nlohmann::ordered_json(nullptr);
  j["timestamp"] = r.timestamp;
  return j;
}

PreferenceRecord record_from_json(const nlohmann::ordered_json& j) {
  PreferenceRecord r;
  r.pair_id = j.at("pair_id").get<std::int64_t>();
  r.state_a = envs::state_from_json(j.at("state_a"));
  r.state_b = envs::state_from_json(j.at("state_b"));
  r.scene_a = envs::scene_from_json(j.at("scene_a"));
  r.scene_b = envs::scene_from_json(j.at("scene_b"));
  if (j.contains("label") && !j.at("label").is_null()) {
    r.label = j.at("label").get<int>();
    check_label(*r.label);
    r.source = j.value("source", std::string("oracle"));
  }
  r.timestamp = j.value("timestamp", std::int64_t{0});
  return r;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<PreferenceRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << "\n";
}

std::vector<PreferenceRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<PreferenceRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PreferenceRecord> sample_pairs(const std::vector<envs::Trajectory>& trajectories,
                                           const envs::EnvConfig& config, int n,
                                           std::uint64_t seed) {
  std::vector<const envs::State*> pool;
  for (const auto& traj : trajectories) {
    for (const auto& s : traj.states) pool.push_back(&s);
  }
  if (pool.size() < 2) throw std::invalid_argument("sample_pairs: need at least two states");
  if (n < 0) throw std::invalid_argument("sample_pairs: negative pair count");
  const double possible = 0.5 * static_cast<double>(pool.size()) * (pool.size() - 1);
  if (n > possible) throw std::invalid_argument("sample_pairs: more pairs requested than exist");

  auto rng = make_rng(seed, /*stream=*/0xFA125);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<PreferenceRecord> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    if (i == j || !used.insert({std::min(i, j), std::max(i, j)}).second) continue;
    PreferenceRecord r;
    r.pair_id = static_cast<std::int64_t>(out.size());
    r.state_a = *pool[i];
    r.state_b = *pool[j];
    r.scene_a = envs::render_scene(r.state_a, config);
    r.scene_b = envs::render_scene(r.state_b, config);
    out.push_back(std::move(r));
  }
  return out;
}

double oracle_tie_tolerance(envs::FeatureId feature) {
  switch (feature) {
    case envs::FeatureId::kRegionOccupancy:
      return 0.5;
    case envs::FeatureId::kDisplacement:
      return 1e-6;
    case envs::FeatureId::kMisalignment:
      return 1e-3;
  }
  throw std::invalid_argument("unknown feature");
}

int oracle_label(const envs::State& a, const envs::State& b, envs::FeatureId feature,
                 const envs::EnvConfig& config) {
  const double fa = envs::feature(a, feature, config);
  const double fb = envs::feature(b, feature, config);
  if (std::abs(fa - fb) < oracle_tie_tolerance(feature)) return kEqual;
  return fa < fb ? kPreferA : kPreferB;
}

std::map<std::string, int> label_histogram(const std::vector<PreferenceRecord>& records) {
  std::map<std::string, int> h{{"0", 0}, {"1", 0}, {"-1", 0}, {"unlabeled", 0}};
  for (const auto& r : records) {
    if (r.label) {
      ++h[std::to_string(*r.label)];
    } else {
      ++h["unlabeled"];
    }
  }
  return h;
}

}  // namespace fdpp::preference
