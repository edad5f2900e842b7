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

#include "evchain/nscl.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evchain {

std::vector<ContrastivePair> build_nscl_batch(std::span<const QAInstance* const> instances,
                                              const Corpus& corpus, Rng& rng,
                                              int batch_instances,
                                              const SurfaceOptions& surface) {
  if (batch_instances < 1) throw std::invalid_argument("batch size must be positive");
  const auto b = static_cast<std::size_t>(batch_instances);
  if (b > instances.size()) throw std::invalid_argument("insufficient instances");

  // Partial Fisher-Yates picks b distinct instances; emit them in input order.
  std::vector<std::size_t> idx(instances.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < b; ++i) {
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  }
  idx.resize(b);
  std::sort(idx.begin(), idx.end());

  std::vector<ContrastivePair> batch;
  batch.reserve(2 * b);
  for (std::size_t i : idx) {
    const QAInstance& inst = *instances[i];
    if (inst.gold_ids.empty())
      throw std::invalid_argument("instance \"" + inst.qid + "\" has no gold evidence");
    const std::string& gold = inst.gold_ids[rng.below(inst.gold_ids.size())];
    batch.push_back({inst.question, text_surface(corpus.source(gold), surface),
                     PairKind::kGold, inst.qid});
    if (!inst.distractor_ids.empty()) {
      const std::string& d = inst.distractor_ids[rng.below(inst.distractor_ids.size())];
      std::string text = text_surface(corpus.source(d), surface);
      batch.push_back({text, text, PairKind::kSelfNegative, inst.qid});
    }
  }
  return batch;
}

std::vector<ContrastivePair> build_nscl_batch(std::span<const QAInstance> instances,
                                              const Corpus& corpus, Rng& rng,
                                              int batch_instances,
                                              const SurfaceOptions& surface) {
  std::vector<const QAInstance*> ptrs;
  ptrs.reserve(instances.size());
  for (const auto& inst : instances) ptrs.push_back(&inst);
  return build_nscl_batch(ptrs, corpus, rng, batch_instances, surface);
}

double info_nce_from_similarity(const std::vector<std::vector<double>>& s) {
  const std::size_t n = s.size();
  if (n == 0) throw std::invalid_argument("contrastive loss needs a non-empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mx = *std::max_element(s[i].begin(), s[i].end());
    double sum = 0.0;
    for (double x : s[i]) sum += std::exp(x - mx);
    total += (mx + std::log(sum)) - s[i][i];
  }
  return std::max(0.0, total / static_cast<double>(n));
}

namespace {

struct Encoded {
  SparseVector features;
  double norm = 0.0;
  Embedding unit;
};

Encoded encode(const EmbeddingModel& model, const std::string& text) {
  Encoded e;
  e.features = model.hasher().featurize(text);
  std::vector<double> v = model.project(e.features);
  double sq = 0.0;
  for (double x : v) sq += x * x;
  e.norm = std::sqrt(sq);
  e.unit = normalize(std::move(v));
  return e;
}

struct Forward {
  std::vector<Encoded> queries;
  std::vector<Encoded> evidence;
  std::vector<std::vector<double>> similarity;
};

Forward forward(const EmbeddingModel& q_model, const EmbeddingModel& e_model,
                std::span<const ContrastivePair> batch, double temperature) {
  if (batch.empty()) throw std::invalid_argument("contrastive loss needs a non-empty batch");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  Forward f;
  for (const auto& pair : batch) {
    f.queries.push_back(encode(q_model, pair.query_text));
    f.evidence.push_back(encode(e_model, pair.evidence_text));
  }
  const std::size_t n = batch.size();
  f.similarity.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      f.similarity[i][j] = cosine(f.queries[i].unit, f.evidence[j].unit) / temperature;
    }
  }
  return f;
}

// Back-propagates dL/du through u = v / |v| and v = P^T x into grad (dim x d).
void backprop_encoder(const Encoded& enc, const std::vector<double>& du, Tensor& grad) {
  if (enc.unit.norm == NormFlag::kZero) return;
  const auto& u = enc.unit.vector;
  double proj = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) proj += u[k] * du[k];
  std::vector<double> dv(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) dv[k] = (du[k] - u[k] * proj) / enc.norm;
  for (const auto& [idx, x] : enc.features.entries) {
    auto row = grad.row(idx);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += x * dv[k];
  }
}

}  // namespace

ContrastiveLoss info_nce_loss(const EmbeddingModel& q_model, const EmbeddingModel& e_model,
                              std::span<const ContrastivePair> batch, double temperature) {
  Forward f = forward(q_model, e_model, batch, temperature);
  ContrastiveLoss out;
  out.loss = info_nce_from_similarity(f.similarity);
  out.similarity = std::move(f.similarity);
  return out;
}

DualGradients loss_gradients(const EmbeddingModel& q_model, const EmbeddingModel& e_model,
                             std::span<const ContrastivePair> batch, double temperature) {
  Forward f = forward(q_model, e_model, batch, temperature);
  const std::size_t n = batch.size();
  const std::size_t d = q_model.dim_out();

  DualGradients g;
  g.loss = info_nce_from_similarity(f.similarity);
  g.question = Tensor(q_model.projection().shape);
  g.evidence = Tensor(e_model.projection().shape);

  // dL/ds_ij = (softmax_ij - [i == j]) / n
  std::vector<std::vector<double>> ds(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = f.similarity[i];
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - mx);
    for (std::size_t j = 0; j < n; ++j) {
      ds[i][j] = (std::exp(row[j] - mx) / sum - (i == j ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> du(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& ue = f.evidence[j].unit.vector;
      const double w = ds[i][j] / temperature;
      for (std::size_t k = 0; k < d; ++k) du[k] += w * ue[k];
    }
    backprop_encoder(f.queries[i], du, g.question);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> du(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& uq = f.queries[i].unit.vector;
      const double w = ds[i][j] / temperature;
      for (std::size_t k = 0; k < d; ++k) du[k] += w * uq[k];
    }
    backprop_encoder(f.evidence[j], du, g.evidence);
  }
  return g;
}

ScreenerTrainResult train_screener(const Corpus& corpus, std::span<const QAInstance> train,
                                   const TrainConfig& cfg, DualEncoder init,
                                   const SurfaceOptions& surface) {
  cfg.validate();
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  if (train.size() < b) throw std::invalid_argument("insufficient instances");

  ScreenerTrainResult result{std::move(init), {}};
  DualEncoder& enc = result.encoders;
  AdamW opt({{&enc.question.projection(), true}, {&enc.evidence.projection(), true}},
            AdamWConfig{.weight_decay = cfg.weight_decay});

  Rng rng(cfg.seed);
  const std::size_t steps_per_epoch = train.size() / b;
  const auto total = static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;
  std::vector<const QAInstance*> order;
  for (const auto& inst : train) order.push_back(&inst);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      std::span<const QAInstance* const> chunk(order.data() + s * b, b);
      const auto batch = build_nscl_batch(chunk, corpus, rng, cfg.batch_size, surface);
      DualGradients g = loss_gradients(enc.question, enc.evidence, batch, cfg.temperature);
      if (!std::isfinite(g.loss) || !g.question.all_finite() || !g.evidence.all_finite())
        throw TrainingDiverged("screener", step);
      const double lr = linear_decay_lr(cfg.learning_rate, step, total);
      std::vector<Tensor> grads;
      grads.push_back(std::move(g.question));
      grads.push_back(std::move(g.evidence));
      opt.step(grads, lr);
      result.history.push_back({step, epoch, g.loss, lr});
    }
  }
  enc.question.projection().round_to_f32();
  enc.evidence.projection().round_to_f32();
  return result;
}

}  // namespace evchain
