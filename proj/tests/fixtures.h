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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evchain/corpus.h"
#include "evchain/rng.h"

namespace evchain::testing {

inline Source text_source(std::string id, std::string body,
                          std::optional<std::string> title = std::nullopt) {
  Source s;
  s.id = std::move(id);
  s.modality = Modality::kText;
  s.title = std::move(title);
  s.body = std::move(body);
  return s;
}

inline Source image_source(std::string id, std::string caption,
                           std::optional<std::vector<std::string>> tags = std::nullopt) {
  Source s;
  s.id = std::move(id);
  s.modality = Modality::kImage;
  s.caption = std::move(caption);
  s.object_tags = std::move(tags);
  return s;
}

inline QAInstance instance(std::string qid, std::string question, std::vector<std::string> gold,
                           std::vector<std::string> distractors, std::string answer = "x") {
  return QAInstance{std::move(qid), std::move(question), std::move(gold), std::move(distractors),
                    std::move(answer)};
}

inline Corpus parse_corpus(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return ingest(in);
}

inline std::string to_jsonl(const Corpus& c) {
  std::ostringstream out;
  export_jsonl(c, out);
  return out.str();
}

inline std::string random_word(Rng& rng, int len = 5) {
  std::string w;
  for (int i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng.below(26)));
  return w;
}

inline std::string random_sentence(Rng& rng, int words) {
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += random_word(rng, 1 + static_cast<int>(rng.below(3)));
  }
  return s;
}

/// Random consistent corpus: every instance gets 1..3 gold and 0..max_distractors
/// distractors drawn from a shared source set.
inline Corpus random_corpus(Rng& rng, int n_instances, int max_distractors = 4) {
  std::vector<Source> sources;
  std::vector<QAInstance> instances;
  int next = 0;
  auto make = [&] {
    const std::string id = "s" + std::to_string(next++);
    const auto kind = rng.below(3);
    if (kind == 1) {
      sources.push_back(image_source(id, random_sentence(rng, 4),
                                     std::vector<std::string>{random_word(rng, 3)}));
    } else {
      Source s = text_source(id, random_sentence(rng, 6));
      if (kind == 2) s.modality = Modality::kTable;
      sources.push_back(std::move(s));
    }
    return id;
  };
  for (int i = 0; i < n_instances; ++i) {
    QAInstance inst;
    inst.qid = "q" + std::to_string(i);
    inst.question = random_sentence(rng, 5);
    inst.answer = random_word(rng);
    const auto n_gold = 1 + rng.below(3);
    for (std::uint64_t g = 0; g < n_gold; ++g) inst.gold_ids.push_back(make());
    const auto n_dis = rng.below(static_cast<std::uint64_t>(max_distractors) + 1);
    for (std::uint64_t d = 0; d < n_dis; ++d) inst.distractor_ids.push_back(make());
    instances.push_back(std::move(inst));
  }
  return Corpus(std::move(sources), std::move(instances));
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                                 std::chrono::steady_clock::now()
                                                     .time_since_epoch()
                                                     .count()));
    path_ = std::filesystem::temp_directory_path() / ("evchain-" + tag + "-" + random_word(rng, 8));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace evchain::testing
