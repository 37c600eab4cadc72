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

#ifndef FDPP_SERVICE_LABEL_SERVER_H_
#define FDPP_SERVICE_LABEL_SERVER_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "fdpp/service/label_session.h"

namespace fdpp::service {

// HTTP front end of a LabelSession:
//   GET  /api/session -> {session_id, total, labeled, skipped, remaining}
//   GET  /api/pair    -> {pair_id, scene_a, scene_b, progress}, or
//                        {done: true, progress} when nothing is left
//   POST /api/label   {pair_id, label: "a"|"b"|"equal"|"skip"} -> {ok: true}
//   POST /api/undo    -> {restored_pair_id}
// Errors are {error: message} with status 400, 404 or 409. When `static_dir`
// is given its files are served from "/".
class LabelServer {
 public:
  LabelServer(LabelSession& session, std::optional<std::filesystem::path> static_dir = {});
  ~LabelServer();
  LabelServer(const LabelServer&) = delete;
  LabelServer& operator=(const LabelServer&) = delete;

  // Binds `port` (0 picks a free one) and returns the bound port. Throws
  // std::runtime_error on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fdpp::service

#endif  // FDPP_SERVICE_LABEL_SERVER_H_
