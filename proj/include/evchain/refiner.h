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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evchain/corpus.h"
#include "evchain/optim.h"
#include "evchain/screener.h"
#include "evchain/tensor_file.h"
#include "evchain/text.h"

namespace evchain {

inline constexpr std::string_view kSeparator = " [SEP] ";

/// "Q [SEP] r1 [SEP] ... [SEP] candidate". The sentinel candidate renders
/// as "[STOP]".
std::string compose_input(std::string_view question,
                          std::span<const std::string> selected_surfaces,
                          std::string_view candidate_surface);

/// Hashed n-grams of a composed string plus segment-interaction features
/// (token overlap of the candidate with the question and with the selected
/// chain, chain depth, sentinel indicators). The interaction block lets a
/// bag-of-features scorer see cross-segment structure.
SparseVector pair_features(const FeatureHasher& hasher, std::string_view composed);

/// One-hidden-layer scorer over pair_features:
///   p = logistic(out . tanh(hidden^T x + hidden_bias) + out_bias)
struct PairScorer {
  FeatureHasher hasher;
  Tensor hidden;       // dim x h
  Tensor hidden_bias;  // h
  Tensor out;          // h
  Tensor out_bias;     // 1

  static PairScorer zeros(FeatureHasher hasher, std::size_t hidden_units = 64);
  static PairScorer random(FeatureHasher hasher, std::size_t hidden_units,
                           std::uint64_t init_seed);

  std::size_t hidden_units() const { return hidden_bias.size(); }
  bool all_finite() const;
  void round_to_f32();
  bool operator==(const PairScorer&) const = default;
};

double score_pair(const PairScorer& scorer, std::string_view composed);

ModelFile to_model_file(const PairScorer& scorer);
PairScorer pair_scorer_from_file(const ModelFile& file);

struct RefineConfig {
  int m_max = 4;
  std::optional<double> score_floor;

  void validate() const;
};

/// Working state of the greedy loop. selected and pool are disjoint, the
/// sentinel stays in the pool until the loop ends, step == |selected|.
struct RetrievalState {
  std::string question;
  std::vector<std::string> selected;
  std::vector<std::string> pool;
  int step = 0;
};

/// Score of `candidate_id` given the chain selected so far.
using ChainScoreFn =
    std::function<double(std::span<const std::string> selected, const std::string& candidate_id)>;

struct RefineTrace {
  std::vector<std::string> selected;
  /// State before each scoring round, in order.
  std::vector<RetrievalState> states;
};

/// Greedy chain selection over `candidates` plus the sentinel: repeatedly
/// take the highest-scoring pool member (ties by ascending id) until the
/// sentinel wins, m_max is reached, or the best score falls under the floor.
RefineTrace greedy_select(const std::string& question, std::span<const std::string> candidates,
                          const ChainScoreFn& score, const RefineConfig& cfg);

std::vector<std::string> refine(const PairScorer& scorer, const std::string& question,
                                const ScreenResult& screened, const Corpus& corpus,
                                const RefineConfig& cfg, const SurfaceOptions& surface = {});

enum class IerLossKind {
  kBinaryCrossEntropy,
  /// -(sum log p(e+) - sum log p(e-)); unbounded below, for comparison only.
  kLiteral,
};

inline constexpr double kProbabilityClamp = 1e-7;

struct IerExample {
  std::string question;
  std::vector<std::string> selected_surfaces;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

double ier_loss(const PairScorer& scorer, const IerExample& example,
                IerLossKind kind = IerLossKind::kBinaryCrossEntropy);

/// Loss from already-computed probabilities (clamped before the logs).
double ier_loss_from_probabilities(std::span<const double> positive_p,
                                   std::span<const double> negative_p,
                                   IerLossKind kind = IerLossKind::kBinaryCrossEntropy);

struct ScorerGradients {
  double loss = 0.0;
  Tensor hidden;
  Tensor hidden_bias;
  Tensor out;
  Tensor out_bias;
};

ScorerGradients ier_loss_gradients(const PairScorer& scorer, const IerExample& example,
                                   IerLossKind kind = IerLossKind::kBinaryCrossEntropy);

struct RefinerTrainOptions {
  IerLossKind loss = IerLossKind::kBinaryCrossEntropy;
  /// Train over every ordering of the gold chain when it has at most 3 items.
  bool permute_gold = false;
};

/// Teacher-forced training states of one instance. For each prefix of the
/// gold chain, the remaining gold are positives; once the chain is complete
/// the sentinel is the positive. Screened non-gold sources are negatives,
/// and so is the sentinel while gold remains.
std::vector<IerExample> refiner_examples(const QAInstance& inst, const ScreenResult& screened,
                                         const Corpus& corpus, bool permute_gold = false,
                                         const SurfaceOptions& surface = {});

struct RefinerTrainResult {
  PairScorer scorer;
  std::vector<LossRecord> history;
};

/// Throws std::invalid_argument when an instance has no screen result and
/// TrainingDiverged on a non-finite loss.
RefinerTrainResult train_refiner(const Corpus& corpus, std::span<const QAInstance> train,
                                 const std::map<std::string, ScreenResult>& screens,
                                 const TrainConfig& cfg, const RefinerTrainOptions& opts,
                                 PairScorer init, const SurfaceOptions& surface = {});

}  // namespace evchain
