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

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evchain/corpus.h"

namespace evchain {

enum class Role { kUser, kAssistant };

struct DialogueTurn {
  Role role = Role::kUser;
  std::string text;
  /// Source id of an image the generator may fetch raw content for.
  std::optional<std::string> image_ref;

  bool operator==(const DialogueTurn&) const = default;
};

/// History alternates user/assistant, starts and ends with a user turn; the
/// last turn carries the question.
struct AnswerRequest {
  std::string qid;
  std::string question;
  std::vector<DialogueTurn> history;
};

enum class AnswerProvider { kExtractive, kExternal };

struct AnswerResult {
  std::string qid;
  std::string answer;
  AnswerProvider provider = AnswerProvider::kExtractive;
};

inline constexpr std::string_view kAcknowledgement = "Noted.";

/// One user turn per evidence item ("Evidence {i} ({modality}): {surface}")
/// followed by an acknowledgement, then "Question: {question}".
AnswerRequest assemble_dialogue(const std::string& question,
                                std::span<const Source* const> retrieved,
                                const std::string& qid = {},
                                const SurfaceOptions& surface = {});

/// Picks the retrieved sentence with the best question-token overlap,
/// normalised by sentence length, trimmed to 32 tokens.
AnswerResult extractive_answer(const AnswerRequest& request,
                               std::span<const Source* const> retrieved,
                               const SurfaceOptions& surface = {});

inline constexpr std::size_t kMaxAnswerTokens = 32;

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"qid":..., "question":..., "history":[{"role":..., "text":..., "image_ref"?:...}]}
std::string request_to_json(const AnswerRequest& request);
AnswerRequest request_from_json(const std::string& body);

/// POSTs the request to `endpoint` (http://host:port/path). One attempt; no
/// fallback. Throws GeneratorError("generator timeout") when the service
/// cannot be reached in time, with the status on a non-2xx reply, and
/// "bad generator payload" when the reply lacks a string "answer".
AnswerResult external_answer(const AnswerRequest& request, const std::string& endpoint,
                             std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace evchain
