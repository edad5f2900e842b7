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

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evchain/answerer.h"
#include "evchain/corpus.h"
#include "evchain/optim.h"
#include "evchain/refiner.h"
#include "evchain/screener.h"

namespace evchain {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbedderConfig {
  std::uint32_t dim = 4096;
  std::vector<int> ngram_orders = {1, 2};
  std::size_t dim_out = 128;
  std::uint64_t hash_seed = 0x5eedf00dULL;
  std::uint64_t init_seed = 17;
};

struct ScorerConfig {
  std::size_t hidden = 64;
  /// Independent of the embedder's hash seed.
  std::uint64_t hash_seed = 0xc0ffeeULL;
  std::uint64_t init_seed = 29;
};

struct AnswerConfig {
  AnswerProvider provider = AnswerProvider::kExtractive;
  std::optional<std::string> endpoint;
  double timeout_s = 30.0;
};

/// Everything a run needs. Defaults are the published hyperparameters; the
/// "desk" profile swaps in settings sized for a single CPU core.
struct RunConfig {
  std::string profile = "full";
  std::string corpus_path;
  std::string model_dir = "models";
  std::string out_dir = ".";
  std::uint64_t seed = 13;
  /// First N instances form the train split, the rest the eval split.
  /// Unset: 80% of the corpus.
  std::optional<int> train_instances;
  int top_k = kDefaultTopK;
  double eism_gap = kDefaultEismGap;
  RefineConfig refine;
  SurfaceOptions surface;
  EmbedderConfig embedder;
  ScorerConfig scorer;
  TrainConfig screener_train;
  TrainConfig refiner_train;
  RefinerTrainOptions refiner_options;
  AnswerConfig answer;
  int jobs = 1;

  void validate() const;
  /// Canonical JSON of the effective configuration.
  std::string to_json() const;
};

/// Full profile: EISM batch 256 / lr 2e-4, IER batch 8 / lr 2e-5, AdamW,
/// linear decay, top-k 16.
RunConfig full_defaults();

/// Parses a JSON config. Keys absent from the file keep their defaults.
/// With "profile": "desk" the built-in desk overrides apply first, then the
/// file's own "desk" block.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

enum class Split { kTrain, kEval, kAll };
Split parse_split(const std::string& name);
std::string split_name(Split split);

/// Instances of `split` under cfg.train_instances.
std::span<const QAInstance> split_instances(const Corpus& corpus, const RunConfig& cfg,
                                            Split split);

}  // namespace evchain
