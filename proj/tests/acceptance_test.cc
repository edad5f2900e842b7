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

// Acceptance suite: one line per criterion, exit status 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evchain/embedder.h"
#include "evchain/evalkit.h"
#include "evchain/nscl.h"
#include "evchain/refiner.h"
#include "evchain/screener.h"
#include "fixtures.h"
#include "gradcheck.h"

using namespace evchain;
using namespace evchain::testing;

namespace {

// Pinned tolerances and sizes.
constexpr double kGradRelTol = 1e-4;
constexpr int kGradConfigs = 20;
constexpr double kGradBudgetSeconds = 30.0;
constexpr double kLnBTol = 1e-9;
constexpr int kScreenTrials = 1000;
constexpr int kGreedyTrials = 500;
constexpr int kBatchCorpora = 200;
constexpr double kRecallSingleHop = 0.95;
constexpr double kF1SingleHop = 0.90;
constexpr double kBridgeMargin = 0.10;
constexpr double kEndToEndBudgetSeconds = 600.0;
constexpr int kRecallRankings = 100;
constexpr int kLoopScorers = 1000;
const std::string kStop(kStopId);

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<ContrastivePair> random_pairs(Rng& rng, int n) {
  static const char* vocab[] = {"red", "bridge", "river", "tower", "old", "city", "iron", "stone"};
  auto text = [&] {
    std::string s;
    for (int i = 0, len = 1 + static_cast<int>(rng.below(4)); i < len; ++i)
      s += std::string(i ? " " : "") + vocab[rng.below(8)];
    return s;
  };
  std::vector<ContrastivePair> out;
  for (int i = 0; i < n; ++i) out.push_back({text(), text(), PairKind::kGold, ""});
  return out;
}

// 1. Analytic gradients vs central finite differences.
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst_nce = 0.0, worst_bce = 0.0;
  for (int c = 0; c < kGradConfigs; ++c) {
    const FeatureHasher h(16, {1, 2}, rng.next());
    auto q = EmbeddingModel::random(h, 4, EncoderRole::kQuestion, rng.next());
    auto e = EmbeddingModel::random(h, 4, EncoderRole::kEvidence, rng.next());
    const auto batch = random_pairs(rng, 2 + static_cast<int>(rng.below(3)));
    const double tau = 0.1 + rng.uniform();
    const auto g = loss_gradients(q, e, batch, tau);
    auto loss = [&] { return info_nce_loss(q, e, batch, tau).loss; };
    worst_nce = std::max({worst_nce, max_gradient_error(q.projection(), g.question, loss),
                          max_gradient_error(e.projection(), g.evidence, loss)});
  }
  for (int c = 0; c < kGradConfigs; ++c) {
    PairScorer s = PairScorer::random(FeatureHasher(16, {1, 2}, rng.next()), 3, rng.next());
    for (double& v : s.hidden.data) v = 0.5 * rng.normal();
    for (double& v : s.hidden_bias.data) v = 0.3 * rng.normal();
    IerExample ex;
    ex.question = random_sentence(rng, 4);
    for (int i = 0, n = static_cast<int>(rng.below(3)); i < n; ++i)
      ex.selected_surfaces.push_back(random_sentence(rng, 3));
    ex.positives.push_back(random_sentence(rng, 3));
    for (int i = 0, n = 1 + static_cast<int>(rng.below(2)); i < n; ++i)
      ex.negatives.push_back(rng.below(3) == 0 ? kStop : random_sentence(rng, 3));
    const auto g = ier_loss_gradients(s, ex);
    auto loss = [&] { return ier_loss(s, ex); };
    worst_bce = std::max({worst_bce, max_gradient_error(s.hidden, g.hidden, loss),
                          max_gradient_error(s.hidden_bias, g.hidden_bias, loss),
                          max_gradient_error(s.out, g.out, loss),
                          max_gradient_error(s.out_bias, g.out_bias, loss)});
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_nce < kGradRelTol && worst_bce < kGradRelTol && secs < kGradBudgetSeconds;
  o.detail = std::to_string(kGradConfigs) + "+" + std::to_string(kGradConfigs) +
             fmt(" configs, max rel err InfoNCE %.2e BCE %.2e, %.2fs", worst_nce, worst_bce, secs);
  return o;
}

// 2. Loss identities.
Outcome loss_identities() {
  Outcome o;
  Rng rng(2002);
  const FeatureHasher h(64, {1, 2}, 5);
  const auto q = EmbeddingModel::random(h, 8, EncoderRole::kQuestion, 1);
  const auto e = EmbeddingModel::random(h, 8, EncoderRole::kEvidence, 2);
  for (int i = 0; i < 50; ++i) {
    if (info_nce_loss(q, e, random_pairs(rng, 1), 0.05 + rng.uniform()).loss != 0.0) o.pass = false;
  }
  double worst = 0.0;
  for (int b : {2, 4, 8}) {
    const double c = rng.uniform() * 2 - 1;
    const std::vector<std::vector<double>> s(b, std::vector<double>(b, c));
    worst = std::max(worst, std::abs(info_nce_from_similarity(s) - std::log(b)));
    // Identical pairs give a constant similarity matrix through the models too.
    const std::vector<ContrastivePair> same(b, {"old stone bridge", "river tower", PairKind::kGold, ""});
    worst = std::max(worst, std::abs(info_nce_loss(q, e, same, 1.0).loss - std::log(b)));
  }
  if (worst > kLnBTol) o.pass = false;
  o.detail = fmt("B=1 loss exactly 0; max |loss - ln B| over B in {2,4,8} = %.2e", worst);
  return o;
}

// 3. Screening and greedy selection equal brute-force oracles.
Outcome oracle_equivalence() {
  Outcome o;
  Rng rng(3003);
  const DualEncoder enc = make_dual_encoder(FeatureHasher(128, {1, 2}, 9), 8, 5);
  int screen_mismatch = 0;
  for (int t = 0; t < kScreenTrials; ++t) {
    std::vector<Source> pool;
    const int n = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < n; ++i)
      pool.push_back(text_source("s" + std::to_string(rng.below(100000)) + "_" + std::to_string(i),
                                 random_sentence(rng, 1 + static_cast<int>(rng.below(3)))));
    std::vector<const Source*> ptrs;
    for (const auto& s : pool) ptrs.push_back(&s);
    rng.shuffle(ptrs);
    const std::string question = random_sentence(rng, 3);
    const int k = 1 + static_cast<int>(rng.below(20));
    const auto res = screen(enc, question, ptrs, k);
    const Embedding qe = embed(enc.question, question);
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& s : pool) scores.emplace_back(s.id, cosine(qe, embed(enc.evidence, text_surface(s))));
    if (res.ids() != oracle_topk(scores, k)) ++screen_mismatch;
  }

  int greedy_mismatch = 0, stop_first = 0, capped = 0;
  for (int t = 0; t < kGreedyTrials; ++t) {
    const int n = static_cast<int>(rng.below(6));
    std::vector<std::string> pool;
    for (int i = 0; i < n; ++i) pool.push_back("c" + std::to_string(i));
    const int m_max = 1 + static_cast<int>(rng.below(4));
    ScoreTable table;
    std::function<void(const std::vector<std::string>&)> fill = [&](const std::vector<std::string>& prefix) {
      std::vector<std::string> cands = {kStop};
      for (const auto& id : pool)
        if (std::find(prefix.begin(), prefix.end(), id) == prefix.end()) cands.push_back(id);
      for (const auto& c : cands) table[{prefix, c}] = static_cast<double>(rng.below(6)) / 5.0;
      if (static_cast<int>(prefix.size()) >= m_max) return;
      for (const auto& c : cands) {
        if (c == kStop) continue;
        auto next = prefix;
        next.push_back(c);
        fill(next);
      }
    };
    fill({});
    auto fn = [&](std::span<const std::string> sel, const std::string& c) {
      return table.at({std::vector<std::string>(sel.begin(), sel.end()), c});
    };
    const auto got = greedy_select("q", pool, fn, RefineConfig{.m_max = m_max}).selected;
    const auto want = oracle_greedy(table, pool, m_max);
    if (got != want) ++greedy_mismatch;
    if (want.empty()) ++stop_first;
    if (static_cast<int>(want.size()) == m_max) ++capped;
  }

  // The scorer-driven loop against a tabulation of the same scorer.
  int refine_mismatch = 0;
  std::vector<Source> sources;
  for (int i = 0; i < 5; ++i) sources.push_back(text_source("x" + std::to_string(i), random_sentence(rng, 4)));
  const Corpus corpus(sources, {instance("q", "question words here", {"x0"}, {})});
  ScreenResult screened{"q", {}, 5};
  for (const auto& s : sources) screened.ranked.push_back({s.id, 0.0});
  std::vector<std::string> ids;
  for (const auto& s : sources) ids.push_back(s.id);
  for (int t = 0; t < 100; ++t) {
    PairScorer s = PairScorer::random(FeatureHasher(256, {1, 2}, rng.next()), 4, rng.next());
    for (double& v : s.hidden.data) v = rng.normal();
    s.out_bias.data[0] = rng.normal();
    const int m_max = 1 + static_cast<int>(rng.below(4));
    ScoreTable table;
    std::function<void(const std::vector<std::string>&)> fill = [&](const std::vector<std::string>& prefix) {
      std::vector<std::string> chain;
      for (const auto& id : prefix) chain.push_back(text_surface(corpus.source(id)));
      table[{prefix, kStop}] = score_pair(s, compose_input(corpus.instances()[0].question, chain, kStop));
      if (static_cast<int>(prefix.size()) >= m_max) return;
      for (const auto& id : ids) {
        if (std::find(prefix.begin(), prefix.end(), id) != prefix.end()) continue;
        table[{prefix, id}] = score_pair(s, compose_input(corpus.instances()[0].question, chain,
                                                          text_surface(corpus.source(id))));
        auto next = prefix;
        next.push_back(id);
        fill(next);
      }
    };
    fill({});
    if (refine(s, corpus.instances()[0].question, screened, corpus, RefineConfig{.m_max = m_max}) !=
        oracle_greedy(table, ids, m_max))
      ++refine_mismatch;
  }

  o.pass = screen_mismatch == 0 && greedy_mismatch == 0 && refine_mismatch == 0 && stop_first > 0 &&
           capped > 0;
  o.detail = std::to_string(kScreenTrials) + " pools: " + std::to_string(screen_mismatch) +
             " mismatches; " + std::to_string(kGreedyTrials) + " tables (" +
             std::to_string(stop_first) + " stop-first, " + std::to_string(capped) +
             " capped): " + std::to_string(greedy_mismatch) + " mismatches; 100 scorers: " +
             std::to_string(refine_mismatch) + " mismatches";
  return o;
}

// 4. Contrastive batch construction law.
Outcome batch_law() {
  Outcome o;
  Rng rng(4004);
  int violations = 0;
  for (int t = 0; t < kBatchCorpora; ++t) {
    const Corpus c = random_corpus(rng, 1 + static_cast<int>(rng.below(20)));
    const int b = 1 + static_cast<int>(rng.below(c.instances().size()));
    Rng brng(rng.next());
    const auto batch = build_nscl_batch(c.instances(), c, brng, b);
    std::map<std::string, int> gold, self;
    for (const auto& p : batch) {
      if (p.kind == PairKind::kGold) {
        ++gold[p.qid];
      } else {
        ++self[p.qid];
        if (p.query_text != p.evidence_text) ++violations;
      }
    }
    std::size_t expected_self = 0;
    for (const auto& inst : c.instances())
      if (gold.count(inst.qid) && !inst.distractor_ids.empty()) ++expected_self;
    if (static_cast<int>(gold.size()) != b) ++violations;
    if (batch.size() != gold.size() + expected_self) ++violations;
    for (const auto& [qid, n] : gold) violations += n != 1;
    for (const auto& [qid, n] : self) violations += n != 1 || !gold.count(qid);
  }
  o.pass = violations == 0;
  o.detail = std::to_string(kBatchCorpora) + " corpora, " + std::to_string(violations) + " violations";
  return o;
}

struct Trained {
  Corpus corpus;
  DualEncoder encoders;
  PairScorer scorer;
  std::vector<ScreenResult> screens;  // every instance
  std::string retrieval_jsonl;        // eval split, full pipeline
};

constexpr int kTrainInstances = 2000;

Trained train_pipeline() {
  Trained t{gen_synthetic(SynthConfig{.n_instances = 2500, .pool_size_per_q = 50,
                                      .bridge_fraction = 0.5, .vocab_size = 2000, .seed = 7}),
            make_dual_encoder(FeatureHasher(), 128, 17),
            PairScorer::random(FeatureHasher(4096, {1, 2}, 0xc0ffee), 64, 29),
            {},
            {}};
  const std::span<const QAInstance> all(t.corpus.instances());
  const auto train = all.subspan(0, kTrainInstances);
  // Desk profile.
  const TrainConfig screener_cfg{.batch_size = 64, .learning_rate = 5e-3, .epochs = 5,
                                 .temperature = 0.05, .weight_decay = 0.01, .seed = 13};
  const TrainConfig refiner_cfg{.batch_size = 8, .learning_rate = 1e-3, .epochs = 5,
                                .weight_decay = 0.01, .seed = 14};
  t.encoders = train_screener(t.corpus, train, screener_cfg, t.encoders).encoders;
  std::map<std::string, ScreenResult> by_qid;
  for (const auto& inst : all) {
    t.screens.push_back(screen(t.encoders, inst.question, t.corpus.pool_of(inst), kDefaultTopK, {}, inst.qid));
    by_qid[inst.qid] = t.screens.back();
  }
  t.scorer = train_refiner(t.corpus, train, by_qid, refiner_cfg, {}, t.scorer).scorer;
  std::ostringstream out;
  for (std::size_t i = kTrainInstances; i < all.size(); ++i) {
    const auto ids = refine(t.scorer, all[i].question, t.screens[i], t.corpus, RefineConfig{});
    out << "{\"qid\":\"" << all[i].qid << "\",\"retrieved\":[";
    for (std::size_t j = 0; j < ids.size(); ++j) out << (j ? "," : "") << '"' << ids[j] << '"';
    out << "]}\n";
  }
  t.retrieval_jsonl = out.str();
  return t;
}

// 5. Synthetic end-to-end experiment.
Outcome end_to_end(const Trained& t, double train_seconds) {
  const auto& all = t.corpus.instances();
  std::vector<double> recall_single, f1_single, f1_bridge, f1_bridge_eism;
  for (std::size_t i = kTrainInstances; i < all.size(); ++i) {
    const auto& inst = all[i];
    const std::set<std::string> gold(inst.gold_ids.begin(), inst.gold_ids.end());
    const auto full = refine(t.scorer, inst.question, t.screens[i], t.corpus, RefineConfig{});
    const auto eism = eism_only_select(t.screens[i]);
    const double f_full = retrieval_prf({full.begin(), full.end()}, gold).f1;
    if (inst.gold_ids.size() == 1) {
      recall_single.push_back(recall_at_k(t.screens[i], gold));
      f1_single.push_back(f_full);
    } else {
      f1_bridge.push_back(f_full);
      f1_bridge_eism.push_back(retrieval_prf({eism.begin(), eism.end()}, gold).f1);
    }
  }
  const double r = order_independent_mean(recall_single);
  const double f = order_independent_mean(f1_single);
  const double fb = order_independent_mean(f1_bridge);
  const double fe = order_independent_mean(f1_bridge_eism);
  Outcome o;
  o.pass = r >= kRecallSingleHop && f >= kF1SingleHop && fb - fe >= kBridgeMargin &&
           train_seconds < kEndToEndBudgetSeconds;
  o.detail = fmt("single-hop R@16 %.4f, F1 %.4f; bridge F1 %.4f vs screening-only %.4f", r, f, fb, fe) +
             fmt(" (+%.1f pp); %.1fs", 100.0 * (fb - fe), train_seconds);
  return o;
}

// 6. Metric fixtures and Recall@k monotonicity.
Outcome metric_fixtures() {
  Outcome o;
  const PRF p = retrieval_prf({"a", "b", "c"}, {"a", "b"});
  const bool prf_ok = std::abs(p.precision - 2.0 / 3.0) < 1e-12 && p.recall == 1.0 &&
                      std::abs(p.f1 - 0.8) < 1e-12;
  const AnswerScore s = answer_em_f1("paris france", "paris");
  const bool em_ok = s.em == 0 && std::abs(s.token_f1 - 2.0 / 3.0) < 1e-12;
  Rng rng(6006);
  int non_monotone = 0;
  for (int t = 0; t < kRecallRankings; ++t) {
    std::vector<ScoredSource> items;
    const int n = 2 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) items.push_back({"s" + std::to_string(i), rng.uniform()});
    std::set<std::string> gold;
    for (int i = 0, m = 1 + static_cast<int>(rng.below(4)); i < m; ++i)
      gold.insert("s" + std::to_string(rng.below(n)));
    double prev = -1.0;
    for (int k = 1; k <= n; ++k) {
      const double r = recall_at_k(ScreenResult{"q", top_k(items, k), k}, gold);
      if (r < prev) ++non_monotone;
      prev = r;
    }
  }
  o.pass = prf_ok && em_ok && non_monotone == 0;
  o.detail = fmt("prf (%.4f, %.4f, %.4f)", p.precision, p.recall, p.f1) +
             fmt("; em %.0f token-F1 %.4f; ", s.em, s.token_f1) + std::to_string(kRecallRankings) +
             " rankings, " + std::to_string(non_monotone) + " recall decreases";
  return o;
}

// 7. Determinism and persistence.
Outcome determinism(const Trained& a, const Trained& b) {
  Outcome o;
  const bool enc_bytes = encode_model_file(to_model_file(a.encoders)) == encode_model_file(to_model_file(b.encoders));
  const bool scorer_bytes = encode_model_file(to_model_file(a.scorer)) == encode_model_file(to_model_file(b.scorer));
  const bool jsonl = a.retrieval_jsonl == b.retrieval_jsonl;

  TempDir dir("acceptance");
  save_model_file(to_model_file(a.encoders), dir.file("screener.bin"));
  save_model_file(to_model_file(a.scorer), dir.file("refiner.bin"));
  const DualEncoder enc = dual_encoder_from_file(load_model_file(dir.file("screener.bin")));
  const PairScorer scorer = pair_scorer_from_file(load_model_file(dir.file("refiner.bin")));
  std::size_t changed = 0, compared = 0;
  const auto& all = a.corpus.instances();
  for (std::size_t i = kTrainInstances; i < all.size(); i += 5) {
    const auto pool = a.corpus.pool_of(all[i]);
    const auto before = screen(a.encoders, all[i].question, pool, kDefaultTopK);
    const auto after = screen(enc, all[i].question, pool, kDefaultTopK);
    for (std::size_t j = 0; j < before.ranked.size(); ++j, ++compared)
      changed += before.ranked[j] != after.ranked[j];
    std::vector<std::string> chain;
    for (const auto& r : before.ranked) {
      const std::string composed = compose_input(all[i].question, chain, text_surface(a.corpus.source(r.source_id)));
      changed += score_pair(a.scorer, composed) != score_pair(scorer, composed);
      ++compared;
    }
  }
  o.pass = enc_bytes && scorer_bytes && jsonl && changed == 0;
  o.detail = std::string("model bytes ") + (enc_bytes && scorer_bytes ? "identical" : "DIFFER") +
             ", retrieval JSONL " + (jsonl ? "identical" : "DIFFERS") + "; reload changed " +
             std::to_string(changed) + " of " + std::to_string(compared) + " scores";
  return o;
}

// 8. Greedy loop safety under random scorers.
Outcome loop_safety() {
  Outcome o;
  Rng rng(8008);
  std::vector<Source> sources;
  for (int i = 0; i < 12; ++i) sources.push_back(text_source("p" + std::to_string(i), random_sentence(rng, 5)));
  const Corpus corpus(sources, {instance("q", "a question", {"p0"}, {})});
  int violations = 0;
  for (int t = 0; t < kLoopScorers; ++t) {
    PairScorer s = PairScorer::random(FeatureHasher(512, {1, 2}, rng.next()), 4, rng.next());
    for (double& v : s.hidden.data) v = rng.normal();
    s.out_bias.data[0] = 2.0 * rng.normal();
    ScreenResult screened{"q", {}, 16};
    for (int i = 0, n = static_cast<int>(rng.below(13)); i < n; ++i)
      screened.ranked.push_back({sources[static_cast<std::size_t>(i)].id, 0.0});
    const int m_max = 1 + static_cast<int>(rng.below(6));
    const auto out = refine(s, random_sentence(rng, 3), screened, corpus, RefineConfig{.m_max = m_max});
    if (static_cast<int>(out.size()) > m_max) ++violations;
    if (std::set<std::string>(out.begin(), out.end()).size() != out.size()) ++violations;
    if (std::find(out.begin(), out.end(), kStop) != out.end()) ++violations;
  }
  o.pass = violations == 0;
  o.detail = std::to_string(kLoopScorers) + " scorers, " + std::to_string(violations) + " violations";
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };
  report(1, "gradient correctness", gradient_correctness());
  report(2, "loss identities", loss_identities());
  report(3, "oracle equivalence", oracle_equivalence());
  report(4, "contrastive batch law", batch_law());

  const auto t0 = std::chrono::steady_clock::now();
  const Trained first = train_pipeline();
  const double train_seconds = seconds_since(t0);
  report(5, "synthetic end-to-end", end_to_end(first, train_seconds));
  report(6, "metric fixtures", metric_fixtures());
  const Trained second = train_pipeline();
  report(7, "determinism and persistence", determinism(first, second));
  report(8, "refine loop safety", loop_safety());

  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
