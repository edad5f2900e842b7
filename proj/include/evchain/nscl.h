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

#include <span>
#include <string>
#include <vector>

#include "evchain/corpus.h"
#include "evchain/embedder.h"
#include "evchain/optim.h"
#include "evchain/rng.h"

namespace evchain {

enum class PairKind { kGold, kSelfNegative };

/// One row of a contrastive batch. Self-negative rows pair a distractor's
/// surface with itself, standing in for the question it never had.
struct ContrastivePair {
  std::string query_text;
  std::string evidence_text;
  PairKind kind = PairKind::kGold;
  std::string qid;

  bool operator==(const ContrastivePair&) const = default;
};

/// Samples `batch_instances` distinct instances and emits, per instance in
/// input order, one gold pair (question, one sampled gold surface) and, when
/// the instance has distractors, one self-negative pair for a single sampled
/// distractor. Throws std::invalid_argument("insufficient instances") when
/// fewer than `batch_instances` instances are available.
std::vector<ContrastivePair> build_nscl_batch(std::span<const QAInstance* const> instances,
                                              const Corpus& corpus, Rng& rng,
                                              int batch_instances,
                                              const SurfaceOptions& surface = {});
std::vector<ContrastivePair> build_nscl_batch(std::span<const QAInstance> instances,
                                              const Corpus& corpus, Rng& rng,
                                              int batch_instances,
                                              const SurfaceOptions& surface = {});

struct ContrastiveLoss {
  double loss = 0.0;
  /// similarity[i][j] = cosine(query_i, evidence_j) / temperature.
  std::vector<std::vector<double>> similarity;
};

/// In-batch softmax cross-entropy with the diagonal as positives, evaluated
/// with log-sum-exp stabilisation.
ContrastiveLoss info_nce_loss(const EmbeddingModel& q_model, const EmbeddingModel& e_model,
                              std::span<const ContrastivePair> batch, double temperature);

/// Loss from a precomputed similarity matrix (already divided by temperature).
double info_nce_from_similarity(const std::vector<std::vector<double>>& similarity);

struct DualGradients {
  double loss = 0.0;
  Tensor question;
  Tensor evidence;
};

/// Exact gradients of info_nce_loss with respect to both projection matrices.
DualGradients loss_gradients(const EmbeddingModel& q_model, const EmbeddingModel& e_model,
                             std::span<const ContrastivePair> batch, double temperature);

struct ScreenerTrainResult {
  DualEncoder encoders;
  std::vector<LossRecord> history;
};

/// epochs x floor(|train| / batch_size) AdamW steps with linear decay,
/// starting from `init`. Deterministic for a given cfg.seed. Throws
/// TrainingDiverged on a non-finite loss.
ScreenerTrainResult train_screener(const Corpus& corpus, std::span<const QAInstance> train,
                                   const TrainConfig& cfg, DualEncoder init,
                                   const SurfaceOptions& surface = {});

}  // namespace evchain
