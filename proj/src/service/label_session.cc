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

#include "fdpp/service/label_session.h"

#include <algorithm>
#include <chrono>

#include "fdpp/service/config.h"

namespace fdpp::service {
namespace {

int parse_label(const std::string& label) {
  if (label == "a") return preference::kPreferA;
  if (label == "b") return preference::kPreferB;
  if (label == "equal") return preference::kEqual;
  throw LabelError(400, "label must be \"a\", \"b\", \"equal\" or \"skip\", got \"" + label + "\"");
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool erase_id(std::deque<std::int64_t>& q, std::int64_t id) {
  const auto it = std::find(q.begin(), q.end(), id);
  if (it == q.end()) return false;
  q.erase(it);
  return true;
}

}  // namespace

LabelSession::LabelSession(std::vector<preference::PreferenceRecord> pairs,
                           std::filesystem::path log_path, Clock clock)
    : pairs_(std::move(pairs)),
      log_path_(std::move(log_path)),
      clock_(clock ? std::move(clock) : Clock(wall_clock_ms)) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!index_.emplace(pairs_[i].pair_id, i).second) {
      throw std::invalid_argument("duplicate pair_id " + std::to_string(pairs_[i].pair_id));
    }
  }
  if (std::filesystem::exists(log_path_)) {
    for (const auto& r : preference::read_records(log_path_)) {
      if (!index_.contains(r.pair_id)) {
        throw std::invalid_argument("label log " + log_path_.string() + " refers to unknown pair " +
                                    std::to_string(r.pair_id));
      }
      if (r.label) labels_.emplace(r.pair_id, *r.label);
    }
  }
  for (const auto& p : pairs_) {
    if (!labels_.contains(p.pair_id)) queue_.push_back(p.pair_id);
  }
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_.open(log_path_, std::ios::app);
  if (!log_) throw std::runtime_error("cannot append to " + log_path_.string());
  session_id_ = sha256_hex(std::filesystem::absolute(log_path_).string()).substr(0, 12);
}

SessionCounts LabelSession::counts_locked() const {
  SessionCounts c;
  c.total = static_cast<int>(pairs_.size());
  c.labeled = static_cast<int>(labels_.size());
  c.skipped = static_cast<int>(skipped_.size());
  c.remaining = c.total - c.labeled;
  return c;
}

SessionCounts LabelSession::counts() const {
  std::lock_guard lock(mu_);
  return counts_locked();
}

std::optional<preference::PreferenceRecord> LabelSession::current() const {
  std::lock_guard lock(mu_);
  if (!queue_.empty()) return pairs_[index_.at(queue_.front())];
  if (!skipped_.empty()) return pairs_[index_.at(skipped_.front())];
  return std::nullopt;
}

void LabelSession::refill_locked() {
  if (queue_.empty()) queue_.swap(skipped_);
}

void LabelSession::submit(std::int64_t pair_id, const std::string& label) {
  std::lock_guard lock(mu_);
  const auto found = index_.find(pair_id);
  if (found == index_.end()) throw LabelError(404, "unknown pair_id " + std::to_string(pair_id));
  if (labels_.contains(pair_id)) {
    throw LabelError(409, "pair " + std::to_string(pair_id) + " is already labeled");
  }
  if (label == "skip") {
    if (erase_id(queue_, pair_id)) skipped_.push_back(pair_id);
    refill_locked();
    return;
  }
  const int value = parse_label(label);

  preference::PreferenceRecord record = pairs_[found->second];
  record.label = value;
  record.source = "human";
  record.timestamp = clock_();
  log_.flush();
  const std::uintmax_t offset = std::filesystem::file_size(log_path_);
  log_ << preference::to_json(record).dump() << "\n";
  log_.flush();
  if (!log_) throw std::runtime_error("failed to append to " + log_path_.string());

  labels_.emplace(pair_id, value);
  history_.emplace_back(pair_id, offset);
  if (!erase_id(queue_, pair_id)) erase_id(skipped_, pair_id);
  refill_locked();
}

std::int64_t LabelSession::undo() {
  std::lock_guard lock(mu_);
  if (history_.empty()) throw LabelError(409, "nothing to undo");
  const auto [pair_id, offset] = history_.back();
  log_.close();
  std::filesystem::resize_file(log_path_, offset);
  log_.open(log_path_, std::ios::app);
  if (!log_) throw std::runtime_error("cannot reopen " + log_path_.string());
  history_.pop_back();
  labels_.erase(pair_id);
  queue_.push_front(pair_id);
  return pair_id;
}

nlohmann::ordered_json to_json(const SessionCounts& c) {
  return {{"total", c.total},
          {"labeled", c.labeled},
          {"skipped", c.skipped},
          {"remaining", c.remaining}};
}

nlohmann::ordered_json pair_response(const preference::PreferenceRecord& pair,
                                     const SessionCounts& counts) {
  return {{"pair_id", pair.pair_id},
          {"scene_a", envs::to_json(pair.scene_a)},
          {"scene_b", envs::to_json(pair.scene_b)},
          {"progress", {{"labeled", counts.labeled}, {"total", counts.total}}}};
}

}  // namespace fdpp::service
