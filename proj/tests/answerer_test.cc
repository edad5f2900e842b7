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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "echo_server.h"
#include "evchain/answerer.h"
#include "evchain/text.h"
#include "fixtures.h"

using namespace evchain;
using namespace evchain::testing;

namespace {

std::vector<const Source*> pointers(const std::vector<Source>& v) {
  std::vector<const Source*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const GeneratorError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("dialogue without evidence is just the question") {
  const auto req = assemble_dialogue("Q", {});
  REQUIRE(req.history.size() == 1);
  CHECK(req.history[0] == DialogueTurn{Role::kUser, "Question: Q", std::nullopt});
}

TEST_CASE("dialogue template for an image and a text") {
  const std::vector<Source> ev = {image_source("i1", "a red bridge", std::vector<std::string>{"bridge"}),
                                  text_source("t1", "built 1889", "Eiffel")};
  const auto req = assemble_dialogue("when", pointers(ev), "q7");
  CHECK(req.qid == "q7");
  REQUIRE(req.history.size() == 5);
  CHECK(req.history[0] ==
        DialogueTurn{Role::kUser, "Evidence 1 (image): a red bridge bridge", std::string("i1")});
  CHECK(req.history[1] == DialogueTurn{Role::kAssistant, "Noted.", std::nullopt});
  CHECK(req.history[2] ==
        DialogueTurn{Role::kUser, "Evidence 2 (text): Eiffel built 1889", std::nullopt});
  CHECK(req.history[3].role == Role::kAssistant);
  CHECK(req.history[4].text == "Question: when");
}

TEST_CASE("dialogue preserves retrieval order and alternation") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Source> ev;
    const int n = static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      const std::string id = "s" + std::to_string(i);
      ev.push_back(rng.below(2) ? image_source(id, random_sentence(rng, 3))
                                : text_source(id, random_sentence(rng, 3)));
    }
    auto ptrs = pointers(ev);
    const auto fwd = assemble_dialogue("q", ptrs);
    CHECK(fwd.history.size() == 2 * ev.size() + 1);
    for (std::size_t i = 0; i < fwd.history.size(); ++i) {
      CHECK(fwd.history[i].role == (i % 2 == 0 ? Role::kUser : Role::kAssistant));
      if (i % 2 == 1) CHECK_FALSE(fwd.history[i].image_ref.has_value());
    }
    for (std::size_t i = 0; i < ev.size(); ++i)
      CHECK(fwd.history[2 * i].image_ref.has_value() == (ev[i].modality == Modality::kImage));
    std::reverse(ptrs.begin(), ptrs.end());
    const auto rev = assemble_dialogue("q", ptrs);
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const auto& a = fwd.history[2 * i].text;
      const auto& b = rev.history[2 * (ev.size() - 1 - i)].text;
      CHECK(a.substr(a.find(':')) == b.substr(b.find(':')));
    }
  }
}

TEST_CASE("extractive answer picks the best-overlap sentence") {
  // Scores by hand, question tokens {when, was, it, built}:
  //   "The tower is tall"    0 / 5
  //   "built 1889"           1 / 3
  //   "it was built in iron" 3 / 6
  const std::vector<Source> ev = {text_source("t", "The tower is tall. built 1889! it was built in iron")};
  auto req = assemble_dialogue("when was it built", pointers(ev));
  CHECK(extractive_answer(req, pointers(ev)).answer == "it was built in iron");

  const std::vector<Source> ev2 = {text_source("t", "The tower is tall. built 1889. paris in france")};
  req = assemble_dialogue("when was it built", pointers(ev2));
  CHECK(extractive_answer(req, pointers(ev2)).answer == "built 1889");
}

TEST_CASE("extractive answer edge cases") {
  const auto empty = assemble_dialogue("q", {});
  const auto res = extractive_answer(empty, {});
  CHECK(res.answer.empty());
  CHECK(res.provider == AnswerProvider::kExtractive);

  const std::vector<Source> same = {text_source("t", "the red bridge")};
  CHECK(extractive_answer(assemble_dialogue("the red bridge", pointers(same)), pointers(same)).answer ==
        "the red bridge");

  // Ties keep the earliest evidence, then the earliest sentence.
  const std::vector<Source> tie = {text_source("a", "red x. red y"), text_source("b", "red z")};
  CHECK(extractive_answer(assemble_dialogue("red", pointers(tie)), pointers(tie)).answer == "red x");

  std::string longs = "red";
  for (int i = 0; i < 40; ++i) longs += " w" + std::to_string(i);
  const std::vector<Source> lng = {text_source("l", longs)};
  const auto clipped = extractive_answer(assemble_dialogue("red", pointers(lng)), pointers(lng)).answer;
  CHECK(tokenize(clipped).size() == kMaxAnswerTokens);
  CHECK(longs.find(clipped) == 0);
}

TEST_CASE("extractive output comes from a retrieved surface") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Source> ev;
    for (int i = 0, n = 1 + static_cast<int>(rng.below(3)); i < n; ++i)
      ev.push_back(text_source("s" + std::to_string(i),
                               random_sentence(rng, 4) + ". " + random_sentence(rng, 3)));
    const auto req = assemble_dialogue(random_sentence(rng, 3), pointers(ev));
    const auto a = extractive_answer(req, pointers(ev)).answer;
    CHECK(a == extractive_answer(req, pointers(ev)).answer);
    bool found = false;
    for (const auto& s : ev) found = found || text_surface(s).find(a) != std::string::npos;
    CHECK(found);
  }
}

TEST_CASE("wire format round trip") {
  const std::vector<Source> ev = {image_source("i1", "cap")};
  const auto req = assemble_dialogue("what?", pointers(ev), "q1");
  const std::string body = request_to_json(req);
  CHECK(body.find(R"("image_ref":"i1")") != std::string::npos);
  const auto back = request_from_json(body);
  CHECK(back.qid == "q1");
  CHECK(back.question == "what?");
  CHECK(back.history == req.history);
}

TEST_CASE("external generator client") {
  EchoServer server("42");
  const std::vector<Source> ev = {text_source("t", "x")};
  const auto req = assemble_dialogue("q?", pointers(ev), "q9");

  const auto res = external_answer(req, server.url("/answer"), std::chrono::seconds(5));
  CHECK(res.answer == "42");
  CHECK(res.provider == AnswerProvider::kExternal);
  CHECK(res.qid == "q9");
  CHECK(server.hits() == 1);
  CHECK(request_from_json(server.last_body()).history == req.history);

  CHECK(error_of([&] { external_answer(req, server.url("/noanswer")); }) == "bad generator payload");
  CHECK(error_of([&] { external_answer(req, server.url("/garbage")); }) == "bad generator payload");
  CHECK(error_of([&] { external_answer(req, server.url("/status/503")); }).find("503") !=
        std::string::npos);
  CHECK(error_of([&] {
          external_answer(req, server.url("/slow"), std::chrono::milliseconds(200));
        }) == "generator timeout");
  CHECK(server.hits() == 1);
}

TEST_CASE("unreachable generator reports a timeout") {
  std::string port;
  {
    EchoServer gone;
    port = gone.url("/answer");
  }
  const auto req = assemble_dialogue("q", {});
  CHECK(error_of([&] { external_answer(req, port, std::chrono::milliseconds(300)); }) ==
        "generator timeout");
}
