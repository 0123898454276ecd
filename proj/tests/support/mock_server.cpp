// SPDX-License-Identifier: Apache-2.0

#include "mock_server.hpp"

#include <fstream>
#include <stdexcept>

#include <httplib.h>

#ifndef LOGPROBER_FIXTURE_DIR
#error "LOGPROBER_FIXTURE_DIR must be defined"
#endif

namespace logprober::testing {

std::string fixture_path(const std::string& name) {
  return std::string(LOGPROBER_FIXTURE_DIR) + "/" + name;
}

Json load_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return Json::parse(in);
}

MockCompletionServer::MockCompletionServer(Json fixture)
    : fixture_(std::move(fixture)), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    {
      std::lock_guard lock(auth_mutex_);
      last_auth_ = req.get_header_value("Authorization");
    }
    if (failures_left_.load() > 0 && failures_left_-- > 0) {
      res.status = failure_status_.load();
      res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
      return;
    }

    Json body;
    try {
      body = Json::parse(req.body);
    } catch (...) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"bad json"}})", "application/json");
      return;
    }
    const std::string prompt = body.value("prompt", "");
    const auto& prompts = fixture_.at("prompts");
    if (!prompts.contains(prompt)) {
      res.status = 404;
      res.set_content(R"({"error":{"message":"unknown prompt"}})", "application/json");
      return;
    }
    const Json& entry = prompts.at(prompt);
    Json reply{{"id", "cmpl-fixture"},
               {"object", "text_completion"},
               {"model", fixture_.value("model", "fixture-model")}};

    if (body.value("echo", false)) {
      if (!echo_supported_) {
        res.status = 400;
        res.set_content(R"({"error":{"message":"echo is not supported with logprobs"}})",
                        "application/json");
        return;
      }
      reply["choices"] = Json::array({Json{
          {"index", 0},
          {"text", prompt},
          {"finish_reason", "length"},
          {"logprobs", Json{{"tokens", entry.at("tokens")},
                            {"token_logprobs", entry.at("token_logprobs")},
                            {"top_logprobs", nullptr}}}}});
    } else {
      const int n = std::min(body.value("n", 1), max_choices_.load());
      const bool greedy = body.value("temperature", 1.0) == 0.0;
      const auto& samples = entry.at("samples");
      Json choices = Json::array();
      for (int i = 0; i < n; ++i) {
        if (!greedy && static_cast<std::size_t>(i) >= samples.size()) break;
        const Json text = greedy ? entry.at("greedy") : samples.at(static_cast<std::size_t>(i));
        choices.push_back(Json{{"index", i}, {"text", text}, {"finish_reason", "stop"}});
      }
      reply["choices"] = std::move(choices);
    }
    res.set_content(reply.dump(), "application/json");
  });

  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("mock server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockCompletionServer::~MockCompletionServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockCompletionServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

void MockCompletionServer::fail_next(int count, int status) {
  failure_status_ = status;
  failures_left_ = count;
}

std::string MockCompletionServer::last_authorization() const {
  std::lock_guard lock(auth_mutex_);
  return last_auth_;
}

}  // namespace logprober::testing
