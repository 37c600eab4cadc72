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

#ifndef FDPP_SERVICE_LABEL_SESSION_H_
#define FDPP_SERVICE_LABEL_SESSION_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdpp/preference/records.h"
#include "json.hpp"

namespace fdpp::service {

// Raised for requests that conflict with the session state; carries the HTTP
// status the server maps it to.
class LabelError : public std::runtime_error {
 public:
  LabelError(int status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct SessionCounts {
  int total = 0;
  int labeled = 0;
  int skipped = 0;  // currently deferred to the end of the queue
  int remaining = 0;
};

// Queue of unlabeled pairs plus an append-only label log (JSONL of labeled
// PreferenceRecords, flushed per label). Pairs already in the log when the
// session opens count as labeled, so a restarted server resumes. All methods
// are thread-safe and log writes are serialized.
class LabelSession {
 public:
  using Clock = std::function<std::int64_t()>;  // Unix milliseconds

  LabelSession(std::vector<preference::PreferenceRecord> pairs, std::filesystem::path log_path,
               Clock clock = {});

  SessionCounts counts() const;
  // Next pair to show, or nullopt when every pair is labeled.
  std::optional<preference::PreferenceRecord> current() const;

  // label is "a", "b", "equal" or "skip". Throws LabelError 400 on an unknown
  // label, 404 on an unknown pair_id and 409 on an already labeled pair.
  void submit(std::int64_t pair_id, const std::string& label);
  // Removes the most recent label from the log and re-queues its pair at the
  // front. Returns its pair_id; LabelError 409 when there is nothing to undo.
  std::int64_t undo();

  const std::filesystem::path& log_path() const { return log_path_; }
  std::string session_id() const { return session_id_; }

 private:
  void refill_locked();
  SessionCounts counts_locked() const;

  mutable std::mutex mu_;
  std::vector<preference::PreferenceRecord> pairs_;
  std::map<std::int64_t, std::size_t> index_;  // pair_id -> pairs_ index
  std::deque<std::int64_t> queue_;
  std::deque<std::int64_t> skipped_;
  std::map<std::int64_t, int> labels_;
  // (pair_id, log size before its record) for every label written this
  // session, newest last.
  std::vector<std::pair<std::int64_t, std::uintmax_t>> history_;
  std::filesystem::path log_path_;
  std::ofstream log_;
  Clock clock_;
  std::string session_id_;
};

// JSON bodies of the HTTP API.
nlohmann::ordered_json to_json(const SessionCounts& counts);
nlohmann::ordered_json pair_response(const preference::PreferenceRecord& pair,
                                     const SessionCounts& counts);

}  // namespace fdpp::service

#endif  // FDPP_SERVICE_LABEL_SESSION_H_
