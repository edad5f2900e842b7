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

#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evchain/corpus.h"
#include "evchain/embedder.h"

namespace evchain {

/// Top-k from the initial screening stage.
inline constexpr int kDefaultTopK = 16;
/// Score gap under which the screening-only path keeps the runner-up.
inline constexpr double kDefaultEismGap = 0.1;

struct ScoredSource {
  std::string source_id;
  double score = 0.0;

  bool operator==(const ScoredSource&) const = default;
};

/// Ranked by descending score, ties by ascending id; no duplicates.
struct ScreenResult {
  std::string qid;
  std::vector<ScoredSource> ranked;
  int k = kDefaultTopK;

  std::vector<std::string> ids() const;
  bool operator==(const ScreenResult&) const = default;
};

/// Canonical ordering used by every ranked list in the pipeline.
bool ranks_before(const ScoredSource& a, const ScoredSource& b);

/// Keeps the k best of already-scored candidates (partial sort).
std::vector<ScoredSource> top_k(std::vector<ScoredSource> scored, int k);

/// Embeds the question once and every pool source once, and keeps the k
/// highest cosine matches. The sentinel must not be in the pool.
ScreenResult screen(const DualEncoder& encoders, const std::string& question,
                    std::span<const Source* const> pool, int k,
                    const SurfaceOptions& surface = {}, const std::string& qid = {});

/// Top-1, plus the runner-up when the two scores differ by less than `gap`.
std::vector<std::string> eism_only_select(const ScreenResult& result,
                                          double gap = kDefaultEismGap);

/// Fraction of gold ids present in the ranked list.
double recall_at_k(const ScreenResult& result, const std::set<std::string>& gold_ids);

/// {"qid":..., "ranked":[{"id":..., "score":...}], "k":...}
std::string screen_to_json(const ScreenResult& result);
ScreenResult screen_from_json(const std::string& line);

void write_screens_jsonl(std::span<const ScreenResult> results, std::ostream& out);
std::vector<ScreenResult> read_screens_jsonl(std::istream& in);

}  // namespace evchain
