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

#include "evchain/refiner.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "evchain/rng.h"

namespace evchain {

std::string compose_input(std::string_view question,
                          std::span<const std::string> selected_surfaces,
                          std::string_view candidate_surface) {
  std::string out(question);
  for (const auto& s : selected_surfaces) {
    out += kSeparator;
    out += s;
  }
  out += kSeparator;
  out += candidate_surface;
  return out;
}

namespace {

std::vector<std::string_view> split_segments(std::string_view composed) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = composed.find(kSeparator, start);
    if (at == std::string_view::npos) {
      parts.push_back(composed.substr(start));
      return parts;
    }
    parts.push_back(composed.substr(start, at - start));
    start = at + kSeparator.size();
  }
}

std::set<std::string> token_set(std::string_view text) {
  auto toks = tokenize(text);
  return {std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end())};
}

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& t : a) n += b.count(t);
  return n;
}

}  // namespace

SparseVector pair_features(const FeatureHasher& hasher, std::string_view composed) {
  SparseVector base = hasher.featurize(composed);
  const auto segments = split_segments(composed);
  if (segments.size() < 2) return base;

  const std::string_view candidate = segments.back();
  const std::size_t depth = segments.size() - 2;
  const auto q = token_set(segments.front());
  std::set<std::string> chain;
  for (std::size_t i = 1; i + 1 < segments.size(); ++i) chain.merge(token_set(segments[i]));
  const bool stop = candidate == kStopId;
  const auto c = stop ? std::set<std::string>{} : token_set(candidate);

  std::size_t chain_only = 0;
  for (const auto& t : c) chain_only += (chain.count(t) && !q.count(t)) ? 1 : 0;

  const std::string d = std::to_string(std::min<std::size_t>(depth, 3));
  std::vector<std::pair<std::string, double>> named = {
      {"q_overlap", static_cast<double>(overlap(c, q))},
      {"chain_overlap", static_cast<double>(overlap(c, chain))},
      {"chain_only_overlap", static_cast<double>(chain_only)},
      {"depth" + d, 1.0},
  };
  if (stop) {
    named.emplace_back("stop", 1.0);
    named.emplace_back("stop@" + d, 1.0);
  }

  std::vector<std::pair<std::uint32_t, double>> raw(base.entries.begin(), base.entries.end());
  for (const auto& [name, value] : named) {
    if (value == 0.0) continue;
    // \x1e keeps these keys disjoint from n-gram keys.
    const auto [bucket, sign] = hasher.slot("\x1e" + name);
    raw.emplace_back(bucket, sign * value);
  }
  return SparseVector::from_unsorted(std::move(raw));
}

PairScorer PairScorer::zeros(FeatureHasher hasher, std::size_t hidden_units) {
  if (hidden_units == 0) throw std::invalid_argument("scorer needs hidden units");
  PairScorer s{std::move(hasher), {}, {}, {}, {}};
  s.hidden = Tensor({s.hasher.dim(), hidden_units});
  s.hidden_bias = Tensor({hidden_units});
  s.out = Tensor({hidden_units});
  s.out_bias = Tensor({1});
  return s;
}

PairScorer PairScorer::random(FeatureHasher hasher, std::size_t hidden_units,
                              std::uint64_t init_seed) {
  PairScorer s = zeros(std::move(hasher), hidden_units);
  Rng rng(init_seed);
  for (double& v : s.hidden.data) v = 0.05 * rng.normal();
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(hidden_units));
  for (double& v : s.out.data) v = out_scale * rng.normal();
  s.round_to_f32();
  return s;
}

bool PairScorer::all_finite() const {
  return hidden.all_finite() && hidden_bias.all_finite() && out.all_finite() &&
         out_bias.all_finite();
}

void PairScorer::round_to_f32() {
  hidden.round_to_f32();
  hidden_bias.round_to_f32();
  out.round_to_f32();
  out_bias.round_to_f32();
}

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct ScorerForward {
  SparseVector x;
  std::vector<double> activation;
  double p = 0.5;
};

ScorerForward run_scorer(const PairScorer& s, std::string_view composed) {
  ScorerForward f;
  f.x = pair_features(s.hasher, composed);
  const std::size_t h = s.hidden_units();
  std::vector<double> z(s.hidden_bias.data.begin(), s.hidden_bias.data.end());
  for (const auto& [idx, value] : f.x.entries) {
    const auto row = s.hidden.row(idx);
    for (std::size_t k = 0; k < h; ++k) z[k] += value * row[k];
  }
  double logit = s.out_bias.data[0];
  f.activation.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    f.activation[k] = std::tanh(z[k]);
    logit += s.out.data[k] * f.activation[k];
  }
  f.p = logistic(logit);
  return f;
}

}  // namespace

double score_pair(const PairScorer& scorer, std::string_view composed) {
  return run_scorer(scorer, composed).p;
}

ModelFile to_model_file(const PairScorer& scorer) {
  ModelFile f;
  f.kind = "pair-scorer";
  f.hasher = scorer.hasher;
  f.tensors = {{"hidden", scorer.hidden},
               {"hidden_bias", scorer.hidden_bias},
               {"out", scorer.out},
               {"out_bias", scorer.out_bias}};
  return f;
}

PairScorer pair_scorer_from_file(const ModelFile& file) {
  if (file.kind != "pair-scorer")
    throw ModelFileError("expected a pair-scorer model, found \"" + file.kind + "\"");
  PairScorer s{file.hasher, file.get("hidden"), file.get("hidden_bias"), file.get("out"),
               file.get("out_bias")};
  const std::size_t h = s.hidden_bias.size();
  if (s.hidden.shape.size() != 2 || s.hidden.rows() != file.hasher.dim() ||
      s.hidden.cols() != h || s.out.size() != h || s.out_bias.size() != 1)
    throw ModelFileError("pair-scorer tensor shapes are inconsistent");
  return s;
}

void RefineConfig::validate() const {
  if (m_max < 1) throw std::invalid_argument("m_max must be at least 1");
  if (score_floor && !(*score_floor >= 0.0 && *score_floor <= 1.0))
    throw std::invalid_argument("score_floor must lie in [0, 1]");
}

RefineTrace greedy_select(const std::string& question, std::span<const std::string> candidates,
                          const ChainScoreFn& score, const RefineConfig& cfg) {
  cfg.validate();
  RetrievalState state;
  state.question = question;
  std::set<std::string> unique(candidates.begin(), candidates.end());
  unique.erase(std::string(kStopId));
  state.pool.assign(unique.begin(), unique.end());
  state.pool.push_back(std::string(kStopId));
  std::sort(state.pool.begin(), state.pool.end());

  RefineTrace trace;
  while (static_cast<int>(state.selected.size()) < cfg.m_max) {
    trace.states.push_back(state);
    std::size_t best = 0;
    double best_score = -INFINITY;
    // Pool is sorted by id, so a strict > keeps the smallest id on ties.
    for (std::size_t i = 0; i < state.pool.size(); ++i) {
      const double s = score(state.selected, state.pool[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (state.pool[best] == kStopId) break;
    if (cfg.score_floor && best_score < *cfg.score_floor) break;
    state.selected.push_back(state.pool[best]);
    state.pool.erase(state.pool.begin() + static_cast<std::ptrdiff_t>(best));
    state.step = static_cast<int>(state.selected.size());
  }
  trace.selected = state.selected;
  return trace;
}

std::vector<std::string> refine(const PairScorer& scorer, const std::string& question,
                                const ScreenResult& screened, const Corpus& corpus,
                                const RefineConfig& cfg, const SurfaceOptions& surface) {
  std::map<std::string, std::string, std::less<>> surfaces;
  for (const auto& r : screened.ranked) {
    surfaces.emplace(r.source_id, text_surface(corpus.source(r.source_id), surface));
  }
  surfaces.emplace(std::string(kStopId), std::string(kStopId));
  const auto ids = screened.ids();
  auto fn = [&](std::span<const std::string> selected, const std::string& candidate) {
    std::vector<std::string> chain;
    chain.reserve(selected.size());
    for (const auto& id : selected) chain.push_back(surfaces.at(id));
    return score_pair(scorer, compose_input(question, chain, surfaces.at(candidate)));
  };
  return greedy_select(question, ids, fn, cfg).selected;
}

double ier_loss_from_probabilities(std::span<const double> positive_p,
                                   std::span<const double> negative_p, IerLossKind kind) {
  auto clamp = [](double p) {
    return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  };
  double loss = 0.0;
  for (double p : positive_p) loss -= std::log(clamp(p));
  for (double p : negative_p) {
    if (kind == IerLossKind::kBinaryCrossEntropy) {
      loss -= std::log(1.0 - clamp(p));
    } else {
      loss += std::log(clamp(p));
    }
  }
  return loss;
}

double ier_loss(const PairScorer& scorer, const IerExample& ex, IerLossKind kind) {
  if (ex.positives.empty() && ex.negatives.empty())
    throw std::invalid_argument("ier_loss needs at least one candidate");
  std::vector<double> pos, neg;
  for (const auto& c : ex.positives)
    pos.push_back(score_pair(scorer, compose_input(ex.question, ex.selected_surfaces, c)));
  for (const auto& c : ex.negatives)
    neg.push_back(score_pair(scorer, compose_input(ex.question, ex.selected_surfaces, c)));
  return ier_loss_from_probabilities(pos, neg, kind);
}

namespace {

// Accumulates the gradient of one candidate's loss term given dL/dlogit.
void backprop_scorer(const PairScorer& s, const ScorerForward& f, double dlogit,
                     ScorerGradients& g) {
  if (dlogit == 0.0) return;
  const std::size_t h = s.hidden_units();
  g.out_bias.data[0] += dlogit;
  std::vector<double> dz(h);
  for (std::size_t k = 0; k < h; ++k) {
    const double a = f.activation[k];
    g.out.data[k] += dlogit * a;
    dz[k] = dlogit * s.out.data[k] * (1.0 - a * a);
    g.hidden_bias.data[k] += dz[k];
  }
  for (const auto& [idx, value] : f.x.entries) {
    auto row = g.hidden.row(idx);
    for (std::size_t k = 0; k < h; ++k) row[k] += value * dz[k];
  }
}

bool clamped(double p) { return p < kProbabilityClamp || p > 1.0 - kProbabilityClamp; }

}  // namespace

namespace {

ScorerGradients zero_gradients(const PairScorer& scorer) {
  ScorerGradients g;
  g.hidden = Tensor(scorer.hidden.shape);
  g.hidden_bias = Tensor(scorer.hidden_bias.shape);
  g.out = Tensor(scorer.out.shape);
  g.out_bias = Tensor(scorer.out_bias.shape);
  return g;
}

// Adds this example's gradient into g and returns its loss.
double accumulate_ier_gradients(const PairScorer& scorer, const IerExample& ex,
                                IerLossKind kind, ScorerGradients& g) {
  if (ex.positives.empty() && ex.negatives.empty())
    throw std::invalid_argument("ier_loss needs at least one candidate");
  std::vector<double> pos, neg;
  for (const auto& c : ex.positives) {
    const auto f = run_scorer(scorer, compose_input(ex.question, ex.selected_surfaces, c));
    pos.push_back(f.p);
    // d(-log p)/dlogit = p - 1
    if (!clamped(f.p)) backprop_scorer(scorer, f, f.p - 1.0, g);
  }
  for (const auto& c : ex.negatives) {
    const auto f = run_scorer(scorer, compose_input(ex.question, ex.selected_surfaces, c));
    neg.push_back(f.p);
    if (clamped(f.p)) continue;
    // d(-log(1-p))/dlogit = p ; d(log p)/dlogit = 1 - p
    const double dlogit = kind == IerLossKind::kBinaryCrossEntropy ? f.p : 1.0 - f.p;
    backprop_scorer(scorer, f, dlogit, g);
  }
  return ier_loss_from_probabilities(pos, neg, kind);
}

}  // namespace

ScorerGradients ier_loss_gradients(const PairScorer& scorer, const IerExample& ex,
                                   IerLossKind kind) {
  ScorerGradients g = zero_gradients(scorer);
  g.loss = accumulate_ier_gradients(scorer, ex, kind, g);
  return g;
}

std::vector<IerExample> refiner_examples(const QAInstance& inst, const ScreenResult& screened,
                                         const Corpus& corpus, bool permute_gold,
                                         const SurfaceOptions& surface) {
  std::set<std::string> gold(inst.gold_ids.begin(), inst.gold_ids.end());
  std::vector<std::string> negatives;
  for (const auto& r : screened.ranked) {
    if (!gold.count(r.source_id))
      negatives.push_back(text_surface(corpus.source(r.source_id), surface));
  }

  std::vector<std::vector<std::string>> orders{inst.gold_ids};
  if (permute_gold && inst.gold_ids.size() <= 3) {
    orders.clear();
    std::vector<std::string> perm = inst.gold_ids;
    std::sort(perm.begin(), perm.end());
    do {
      orders.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  std::vector<IerExample> out;
  std::set<std::vector<std::string>> seen_prefixes;
  for (const auto& order : orders) {
    std::vector<std::string> surfaces;
    for (const auto& id : order) surfaces.push_back(text_surface(corpus.source(id), surface));
    for (std::size_t j = 0; j <= order.size(); ++j) {
      // Different orderings share prefixes; the state for a prefix set is
      // the same regardless of which ordering produced it.
      std::vector<std::string> prefix(order.begin(), order.begin() + static_cast<long>(j));
      if (!seen_prefixes.insert(prefix).second) continue;
      IerExample ex;
      ex.question = inst.question;
      ex.selected_surfaces.assign(surfaces.begin(), surfaces.begin() + static_cast<long>(j));
      ex.negatives = negatives;
      if (j < order.size()) {
        ex.positives.assign(surfaces.begin() + static_cast<long>(j), surfaces.end());
        ex.negatives.push_back(std::string(kStopId));
      } else {
        ex.positives.push_back(std::string(kStopId));
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

RefinerTrainResult train_refiner(const Corpus& corpus, std::span<const QAInstance> train,
                                 const std::map<std::string, ScreenResult>& screens,
                                 const TrainConfig& cfg, const RefinerTrainOptions& opts,
                                 PairScorer init, const SurfaceOptions& surface) {
  cfg.validate();
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  if (train.size() < b && cfg.epochs > 0) throw std::invalid_argument("insufficient instances");

  std::vector<std::vector<IerExample>> per_instance;
  per_instance.reserve(train.size());
  for (const auto& inst : train) {
    auto it = screens.find(inst.qid);
    if (it == screens.end())
      throw std::invalid_argument("no screen result for instance \"" + inst.qid + "\"");
    per_instance.push_back(refiner_examples(inst, it->second, corpus, opts.permute_gold, surface));
  }

  RefinerTrainResult result{std::move(init), {}};
  PairScorer& s = result.scorer;
  AdamW opt({{&s.hidden, true}, {&s.hidden_bias, false}, {&s.out, true}, {&s.out_bias, false}},
            AdamWConfig{.weight_decay = cfg.weight_decay});

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t steps_per_epoch = b == 0 ? 0 : train.size() / b;
  const auto total = static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;

  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t st = 0; st < steps_per_epoch; ++st, ++step) {
      ScorerGradients acc = zero_gradients(s);
      double loss = 0.0;
      for (std::size_t i = st * b; i < (st + 1) * b; ++i) {
        for (const auto& ex : per_instance[order[i]]) {
          loss += accumulate_ier_gradients(s, ex, opts.loss, acc);
        }
      }
      const double scale = 1.0 / static_cast<double>(b);
      loss *= scale;
      std::vector<Tensor> grads;
      for (Tensor* t : {&acc.hidden, &acc.hidden_bias, &acc.out, &acc.out_bias}) {
        for (double& v : t->data) v *= scale;
        grads.push_back(std::move(*t));
      }
      if (!std::isfinite(loss)) throw TrainingDiverged("refiner", step);
      const double lr = linear_decay_lr(cfg.learning_rate, step, total);
      opt.step(grads, lr);
      result.history.push_back({step, epoch, loss, lr});
    }
  }
  s.round_to_f32();
  return result;
}

}  // namespace evchain
