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

#include "fdpp/service/label_server.h"

#include <httplib.h>

namespace fdpp::service {
namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

}  // namespace

struct LabelServer::Impl {
  LabelSession& session;
  httplib::Server server;

  explicit Impl(LabelSession& s) : session(s) {}
};

LabelServer::LabelServer(LabelSession& session, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(session)) {
  httplib::Server& server = impl_->server;
  LabelSession& s = impl_->session;

  server.Get("/api/session", [&s](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json body{{"session_id", s.session_id()}};
    body.update(to_json(s.counts()));
    reply(res, 200, body);
  });

  server.Get("/api/pair", [&s](const httplib::Request&, httplib::Response& res) {
    const auto pair = s.current();
    const SessionCounts counts = s.counts();
    if (!pair) {
      reply(res, 200,
            {{"done", true}, {"progress", {{"labeled", counts.labeled}, {"total", counts.total}}}});
      return;
    }
    reply(res, 200, pair_response(*pair, counts));
  });

  server.Post("/api/label", [&s](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::ordered_json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (body.is_discarded() || !body.is_object() || !body.contains("pair_id") ||
        !body["pair_id"].is_number_integer() || !body.contains("label") ||
        !body["label"].is_string()) {
      reply_error(res, 400, "expected {\"pair_id\": integer, \"label\": string}");
      return;
    }
    try {
      s.submit(body["pair_id"].get<std::int64_t>(), body["label"].get<std::string>());
      reply(res, 200, {{"ok", true}});
    } catch (const LabelError& e) {
      reply_error(res, e.status(), e.what());
    }
  });

  server.Post("/api/undo", [&s](const httplib::Request&, httplib::Response& res) {
    try {
      reply(res, 200, {{"restored_pair_id", s.undo()}});
    } catch (const LabelError& e) {
      reply_error(res, e.status(), e.what());
    }
  });

  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          reply_error(res, 500, e.what());
        }
      });

  if (static_dir && !server.set_mount_point("/", static_dir->string())) {
    throw std::invalid_argument("static asset directory " + static_dir->string() +
                                " does not exist");
  }
}

LabelServer::~LabelServer() { stop(); }

int LabelServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void LabelServer::listen() {
  impl_->server.listen_after_bind();
}

void LabelServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace fdpp::service
