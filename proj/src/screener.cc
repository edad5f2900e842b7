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

#include "evchain/screener.h"

#include <algorithm>
#include <istream>
#include <stdexcept>

#include "json.hpp"

namespace evchain {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> ScreenResult::ids() const {
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.source_id);
  return out;
}

bool ranks_before(const ScoredSource& a, const ScoredSource& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.source_id < b.source_id;
}

std::vector<ScoredSource> top_k(std::vector<ScoredSource> scored, int k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const auto keep = std::min(scored.size(), static_cast<std::size_t>(k));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

ScreenResult screen(const DualEncoder& encoders, const std::string& question,
                    std::span<const Source* const> pool, int k,
                    const SurfaceOptions& surface, const std::string& qid) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (pool.empty()) throw std::invalid_argument("screening pool is empty");
  const Embedding q = embed(encoders.question, question);
  std::vector<ScoredSource> scored;
  scored.reserve(pool.size());
  for (const Source* s : pool) {
    if (s->modality == Modality::kSentinel)
      throw std::invalid_argument("the sentinel is not screened");
    scored.push_back({s->id, cosine(q, embed(encoders.evidence, text_surface(*s, surface)))});
  }
  // Duplicate pool entries collapse to one ranked entry.
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.source_id < b.source_id;
  });
  scored.erase(std::unique(scored.begin(), scored.end(),
                           [](const auto& a, const auto& b) {
                             return a.source_id == b.source_id;
                           }),
               scored.end());
  return ScreenResult{qid, top_k(std::move(scored), k), k};
}

std::vector<std::string> eism_only_select(const ScreenResult& result, double gap) {
  if (result.ranked.empty()) throw std::invalid_argument("empty screening result");
  std::vector<std::string> out{result.ranked[0].source_id};
  if (result.ranked.size() > 1 && result.ranked[0].score - result.ranked[1].score < gap)
    out.push_back(result.ranked[1].source_id);
  return out;
}

double recall_at_k(const ScreenResult& result, const std::set<std::string>& gold_ids) {
  if (gold_ids.empty()) throw std::invalid_argument("recall needs at least one gold id");
  std::size_t hits = 0;
  for (const auto& r : result.ranked) hits += gold_ids.count(r.source_id);
  return static_cast<double>(hits) / static_cast<double>(gold_ids.size());
}

std::string screen_to_json(const ScreenResult& result) {
  ordered_json rec;
  rec["qid"] = result.qid;
  rec["ranked"] = ordered_json::array();
  for (const auto& r : result.ranked) {
    ordered_json item;
    item["id"] = r.source_id;
    item["score"] = r.score;
    rec["ranked"].push_back(std::move(item));
  }
  rec["k"] = result.k;
  return rec.dump();
}

ScreenResult screen_from_json(const std::string& line) {
  const json rec = json::parse(line);
  ScreenResult r;
  r.qid = rec.at("qid").get<std::string>();
  r.k = rec.at("k").get<int>();
  for (const auto& item : rec.at("ranked")) {
    r.ranked.push_back({item.at("id").get<std::string>(), item.at("score").get<double>()});
  }
  return r;
}

void write_screens_jsonl(std::span<const ScreenResult> results, std::ostream& out) {
  for (const auto& r : results) out << screen_to_json(r) << '\n';
}

std::vector<ScreenResult> read_screens_jsonl(std::istream& in) {
  std::vector<ScreenResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(screen_from_json(line));
  }
  return out;
}

}  // namespace evchain
