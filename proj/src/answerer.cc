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

#include "evchain/answerer.h"

#include <set>

#include "evchain/text.h"
#include "httplib.h"
#include "json.hpp"

namespace evchain {

using nlohmann::json;
using nlohmann::ordered_json;

AnswerRequest assemble_dialogue(const std::string& question,
                                std::span<const Source* const> retrieved,
                                const std::string& qid, const SurfaceOptions& surface) {
  AnswerRequest req;
  req.qid = qid;
  req.question = question;
  for (std::size_t i = 0; i < retrieved.size(); ++i) {
    const Source& s = *retrieved[i];
    DialogueTurn user;
    user.role = Role::kUser;
    user.text = "Evidence " + std::to_string(i + 1) + " (" +
                std::string(modality_name(s.modality)) + "): " + text_surface(s, surface);
    if (s.modality == Modality::kImage) user.image_ref = s.id;
    req.history.push_back(std::move(user));
    req.history.push_back({Role::kAssistant, std::string(kAcknowledgement), std::nullopt});
  }
  req.history.push_back({Role::kUser, "Question: " + question, std::nullopt});
  return req;
}

namespace {

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?') {
      out.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

AnswerResult extractive_answer(const AnswerRequest& request,
                               std::span<const Source* const> retrieved,
                               const SurfaceOptions& surface) {
  AnswerResult result{request.qid, "", AnswerProvider::kExtractive};
  const auto q_tokens = tokenize(request.question);
  const std::set<std::string> q(q_tokens.begin(), q_tokens.end());

  double best = -1.0;
  for (const Source* s : retrieved) {
    const std::string text = text_surface(*s, surface);
    for (std::string_view sentence : split_sentences(text)) {
      const auto tokens = tokenize(sentence);
      if (tokens.empty()) continue;
      const std::set<std::string> distinct(tokens.begin(), tokens.end());
      std::size_t shared = 0;
      for (const auto& t : distinct) shared += q.count(t);
      const double score =
          static_cast<double>(shared) / (1.0 + static_cast<double>(tokens.size()));
      if (score > best) {
        best = score;
        if (tokens.size() <= kMaxAnswerTokens) {
          result.answer = std::string(trim(sentence));
        } else {
          std::string clipped;
          for (std::size_t i = 0; i < kMaxAnswerTokens; ++i) {
            if (i) clipped += ' ';
            clipped += tokens[i];
          }
          result.answer = std::move(clipped);
        }
      }
    }
  }
  return result;
}

std::string request_to_json(const AnswerRequest& request) {
  ordered_json rec;
  rec["qid"] = request.qid;
  rec["question"] = request.question;
  rec["history"] = ordered_json::array();
  for (const auto& turn : request.history) {
    ordered_json t;
    t["role"] = turn.role == Role::kUser ? "user" : "assistant";
    t["text"] = turn.text;
    if (turn.image_ref) t["image_ref"] = *turn.image_ref;
    rec["history"].push_back(std::move(t));
  }
  return rec.dump();
}

AnswerRequest request_from_json(const std::string& body) {
  const json rec = json::parse(body);
  AnswerRequest req;
  req.qid = rec.at("qid").get<std::string>();
  req.question = rec.at("question").get<std::string>();
  for (const auto& t : rec.at("history")) {
    DialogueTurn turn;
    const auto role = t.at("role").get<std::string>();
    if (role == "user") {
      turn.role = Role::kUser;
    } else if (role == "assistant") {
      turn.role = Role::kAssistant;
    } else {
      throw std::invalid_argument("unknown dialogue role \"" + role + "\"");
    }
    turn.text = t.at("text").get<std::string>();
    if (t.contains("image_ref")) turn.image_ref = t["image_ref"].get<std::string>();
    req.history.push_back(std::move(turn));
  }
  return req;
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw GeneratorError("bad generator endpoint \"" + url + "\"");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

AnswerResult external_answer(const AnswerRequest& request, const std::string& endpoint,
                             std::chrono::milliseconds timeout) {
  const Endpoint ep = split_endpoint(endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(ep.path, request_to_json(request), "application/json");
  if (!res) throw GeneratorError("generator timeout");
  if (res->status < 200 || res->status >= 300)
    throw GeneratorError("generator returned HTTP status " + std::to_string(res->status));

  json payload;
  try {
    payload = json::parse(res->body);
  } catch (const json::exception&) {
    throw GeneratorError("bad generator payload");
  }
  if (!payload.is_object() || !payload.contains("answer") || !payload["answer"].is_string())
    throw GeneratorError("bad generator payload");
  return AnswerResult{request.qid, payload["answer"].get<std::string>(),
                      AnswerProvider::kExternal};
}

}  // namespace evchain
