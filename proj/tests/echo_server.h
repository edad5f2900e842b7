// Copyright 2026 The evchain Authors
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

#pragma once

#include <atomic>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace evchain::testing {

/// Local generator stand-in. POST /answer replies {"answer": <fixed>};
/// /status/<code> replies with that status; /garbage replies non-JSON;
/// /noanswer replies JSON without the answer field; /slow sleeps first.
class EchoServer {
 public:
  explicit EchoServer(std::string answer = "42") : answer_(std::move(answer)) {
    server_.Post("/answer", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      ++hits_;
      res.set_content(nlohmann::json{{"answer", answer_}}.dump(), "application/json");
    });
    server_.Post(R"(/status/(\d+))", [](const httplib::Request& req, httplib::Response& res) {
      res.status = std::stoi(req.matches[1]);
      res.set_content("{}", "application/json");
    });
    server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<html>nope</html>", "text/html");
    });
    server_.Post("/noanswer", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text":"42"})", "application/json");
    });
    server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content(R"({"answer":"late"})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }
  EchoServer(const EchoServer&) = delete;
  EchoServer& operator=(const EchoServer&) = delete;

  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  const std::string& last_body() const { return last_body_; }
  int hits() const { return hits_; }

 private:
  std::string answer_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::string last_body_;
  std::atomic<int> hits_{0};
};

}  // namespace evchain::testing
