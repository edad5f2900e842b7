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

#include "evchain/evalkit.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "evchain/rng.h"
#include "json.hpp"

namespace evchain {

using nlohmann::ordered_json;

PRF retrieval_prf(const std::set<std::string>& retrieved, const std::set<std::string>& gold) {
  if (gold.empty()) throw std::invalid_argument("retrieval_prf needs a non-empty gold set");
  std::size_t hit = 0;
  for (const auto& id : retrieved) hit += gold.count(id);
  PRF out;
  out.precision =
      retrieved.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(retrieved.size());
  out.recall = static_cast<double>(hit) / static_cast<double>(gold.size());
  const double sum = out.precision + out.recall;
  out.f1 = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

std::string normalize_answer(std::string_view text, bool drop_articles) {
  std::string cleaned;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    cleaned.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
  }
  std::string out;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
    std::size_t j = i;
    while (j < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[j]))) ++j;
    if (j > i) {
      const std::string_view word(cleaned.data() + i, j - i);
      if (!(drop_articles && (word == "a" || word == "an" || word == "the"))) {
        if (!out.empty()) out += ' ';
        out += word;
      }
    }
    i = j;
  }
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t j = std::min(s.find(' ', i), s.size());
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

}  // namespace

AnswerScore answer_em_f1(std::string_view prediction, std::string_view reference,
                         bool drop_articles) {
  const std::string p = normalize_answer(prediction, drop_articles);
  const std::string r = normalize_answer(reference, drop_articles);
  if (p.empty() && r.empty()) return {1, 1.0};
  if (p.empty() || r.empty()) return {0, 0.0};

  AnswerScore out;
  out.em = p == r ? 1 : 0;
  const auto pt = split_ws(p);
  const auto rt = split_ws(r);
  std::map<std::string, int> counts;
  for (const auto& t : rt) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : pt) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return out;
  const double precision = static_cast<double>(common) / static_cast<double>(pt.size());
  const double recall = static_cast<double>(common) / static_cast<double>(rt.size());
  out.token_f1 = 2.0 * precision * recall / (precision + recall);
  if (out.em == 1) out.token_f1 = 1.0;
  return out;
}

double order_independent_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

RetrievalReport make_retrieval_report(
    const std::map<std::string, std::vector<std::string>>& retrieved,
    std::span<const QAInstance> instances) {
  RetrievalReport report;
  std::vector<double> p, r, f;
  for (const auto& inst : instances) {
    auto it = retrieved.find(inst.qid);
    if (it == retrieved.end()) continue;
    const PRF s = retrieval_prf({it->second.begin(), it->second.end()},
                                {inst.gold_ids.begin(), inst.gold_ids.end()});
    report.per_qid[inst.qid] = s;
    p.push_back(s.precision);
    r.push_back(s.recall);
    f.push_back(s.f1);
  }
  report.mean = {order_independent_mean(p), order_independent_mean(r),
                 order_independent_mean(f)};
  return report;
}

QAReport make_qa_report(const std::map<std::string, std::string>& predictions,
                        std::span<const QAInstance> instances, bool drop_articles) {
  QAReport report;
  std::vector<double> em, f1;
  for (const auto& inst : instances) {
    auto it = predictions.find(inst.qid);
    if (it == predictions.end()) continue;
    const AnswerScore s = answer_em_f1(it->second, inst.answer, drop_articles);
    report.per_qid[inst.qid] = s;
    em.push_back(s.em);
    f1.push_back(s.token_f1);
  }
  report.mean_em = order_independent_mean(em);
  report.mean_token_f1 = order_independent_mean(f1);
  return report;
}

std::string to_json(const RetrievalReport& report) {
  ordered_json out;
  out["per_qid"] = ordered_json::object();
  for (const auto& [qid, s] : report.per_qid) {
    out["per_qid"][qid] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  out["mean"] = {{"precision", report.mean.precision},
                 {"recall", report.mean.recall},
                 {"f1", report.mean.f1}};
  return out.dump(2);
}

std::string to_json(const QAReport& report) {
  ordered_json out;
  out["per_qid"] = ordered_json::object();
  for (const auto& [qid, s] : report.per_qid) {
    out["per_qid"][qid] = {{"em", s.em}, {"token_f1", s.token_f1}};
  }
  out["mean"] = {{"em", report.mean_em}, {"token_f1", report.mean_token_f1}};
  return out.dump(2);
}

void SynthConfig::validate() const {
  if (n_instances < 1) throw std::invalid_argument("n_instances must be positive");
  if (pool_size_per_q < 3) throw std::invalid_argument("pool_size_per_q must be at least 3");
  if (!(bridge_fraction >= 0.0 && bridge_fraction <= 1.0))
    throw std::invalid_argument("bridge_fraction must lie in [0, 1]");
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be positive");
}

namespace {

constexpr int kBodyTokens = 8;
constexpr int kQuestionGoldTokens = 4;
constexpr int kMinGeneralVocab = 64;

std::string token_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "t%04d", index);
  return buf;
}

std::string join(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out += ' ';
    out += token_name(t);
  }
  return out;
}

class SynthBuilder {
 public:
  SynthBuilder(const SynthConfig& cfg, int n_bridge)
      : cfg_(cfg), rng_(cfg.seed), n_bridge_(n_bridge) {
    first_general_ = n_bridge_ + 2 * kSynthRelations;
    n_general_ = cfg.vocab_size - first_general_;
  }

  int general(std::uint64_t i) const { return first_general_ + static_cast<int>(i); }
  int question_cue(int r) const { return n_bridge_ + r; }
  int evidence_cue(int r) const { return n_bridge_ + kSynthRelations + r; }

  // Distinct general tokens avoiding `avoid` (which is extended with them).
  std::vector<int> draw_general(int count, std::set<int>& avoid) {
    std::vector<int> out;
    while (static_cast<int>(out.size()) < count) {
      const int t = general(rng_.below(static_cast<std::uint64_t>(n_general_)));
      if (avoid.insert(t).second) out.push_back(t);
    }
    return out;
  }

  template <typename T>
  std::vector<T> pick(const std::vector<T>& from, std::size_t count) {
    std::vector<T> copy = from;
    rng_.shuffle(copy);
    copy.resize(count);
    return copy;
  }

  Source make_source(const std::vector<int>& tokens) {
    Source s;
    const auto kind = source_counter_ % 3;
    ++source_counter_;
    if (kind == 0) {
      s.modality = Modality::kText;
      s.body = join(tokens);
    } else if (kind == 1) {
      s.modality = Modality::kImage;
      s.caption = join(tokens);
    } else {
      s.modality = Modality::kTable;
      const auto half = static_cast<long>(tokens.size() / 2);
      s.body = join({tokens.begin(), tokens.begin() + half}) + " ; " +
               join({tokens.begin() + half, tokens.end()});
    }
    return s;
  }

  void build(int index, bool bridge, std::vector<Source>& sources,
             std::vector<QAInstance>& instances) {
    QAInstance inst;
    char qid[16];
    std::snprintf(qid, sizeof qid, "q%05d", index);
    inst.qid = qid;

    std::vector<std::vector<int>> gold_tokens;
    std::vector<int> question;
    std::set<int> used;  // every token of gold bodies and question
    int relation = -1;
    if (!bridge) {
      auto body = draw_general(kBodyTokens, used);
      auto asked = pick(body, kQuestionGoldTokens);
      question = asked;
      for (int t : draw_general(2, used)) question.push_back(t);
      std::vector<int> rest;
      for (int t : body) {
        if (std::find(asked.begin(), asked.end(), t) == asked.end()) rest.push_back(t);
      }
      inst.answer = token_name(rest[rng_.below(rest.size())]);
      gold_tokens.push_back(body);
    } else {
      const int bridge_token = next_bridge_++;
      relation = static_cast<int>(rng_.below(kSynthRelations));
      auto first = draw_general(kBodyTokens - 1, used);
      auto asked = pick(first, kQuestionGoldTokens);
      question = asked;
      for (int t : draw_general(1, used)) question.push_back(t);
      question.push_back(question_cue(relation));
      first.push_back(bridge_token);
      rng_.shuffle(first);

      auto second = draw_general(kBodyTokens - 2, used);
      inst.answer = token_name(second[rng_.below(second.size())]);
      second.push_back(bridge_token);
      second.push_back(evidence_cue(relation));
      rng_.shuffle(second);
      used.insert(bridge_token);
      gold_tokens.push_back(first);
      gold_tokens.push_back(second);
    }
    rng_.shuffle(question);
    inst.question = join(question) + "?";

    std::vector<int> shared_candidates;
    for (int t : question) {
      if (t >= first_general_) shared_candidates.push_back(t);
    }

    const int n_distractors = cfg_.pool_size_per_q - static_cast<int>(gold_tokens.size());
    std::vector<std::pair<std::vector<int>, bool>> pool;  // tokens, is_gold
    for (std::size_t g = 0; g < gold_tokens.size(); ++g) pool.push_back({gold_tokens[g], true});
    for (int d = 0; d < n_distractors; ++d) {
      std::vector<int> tokens;
      if (rng_.below(2) == 1) tokens.push_back(shared_candidates[rng_.below(shared_candidates.size())]);
      std::set<int> avoid = used;
      for (int t : draw_general(kBodyTokens - static_cast<int>(tokens.size()), avoid))
        tokens.push_back(t);
      if (rng_.uniform() < 0.3) {
        int r = static_cast<int>(rng_.below(kSynthRelations));
        if (r == relation) r = (r + 1) % kSynthRelations;
        tokens.back() = evidence_cue(r);
      }
      rng_.shuffle(tokens);
      pool.push_back({tokens, false});
    }

    // Shuffle the pool so ids carry no hint of which sources are gold.
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.shuffle(order);
    std::vector<std::string> ids(pool.size());
    for (std::size_t pos : order) {
      Source s = make_source(pool[pos].first);
      char id[16];
      std::snprintf(id, sizeof id, "s%07d", static_cast<int>(sources.size()));
      s.id = id;
      ids[pos] = s.id;
      if (!pool[pos].second) inst.distractor_ids.push_back(s.id);
      sources.push_back(std::move(s));
    }
    for (std::size_t g = 0; g < gold_tokens.size(); ++g) inst.gold_ids.push_back(ids[g]);
    instances.push_back(std::move(inst));
  }

 private:
  const SynthConfig& cfg_;
  Rng rng_;
  int n_bridge_;
  int next_bridge_ = 0;
  int first_general_ = 0;
  int n_general_ = 0;
  std::uint64_t source_counter_ = 0;
};

}  // namespace

Corpus gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const int n_bridge =
      static_cast<int>(std::lround(cfg.bridge_fraction * static_cast<double>(cfg.n_instances)));
  const int general = cfg.vocab_size - n_bridge - 2 * kSynthRelations;
  if (general < kMinGeneralVocab)
    throw std::invalid_argument(
        "vocabulary too small: " + std::to_string(cfg.vocab_size) + " tokens cannot hold " +
        std::to_string(n_bridge) + " unique bridge tokens plus " +
        std::to_string(kMinGeneralVocab + 2 * kSynthRelations) + " shared tokens");

  SynthBuilder builder(cfg, n_bridge);
  Rng layout(cfg.seed ^ 0xb81d9e5ULL);
  std::vector<bool> is_bridge(static_cast<std::size_t>(cfg.n_instances), false);
  for (int i = 0; i < n_bridge; ++i) is_bridge[static_cast<std::size_t>(i)] = true;
  layout.shuffle(is_bridge);

  std::vector<Source> sources;
  std::vector<QAInstance> instances;
  for (int i = 0; i < cfg.n_instances; ++i) {
    builder.build(i, is_bridge[static_cast<std::size_t>(i)], sources, instances);
  }
  return Corpus(std::move(sources), std::move(instances));
}

std::vector<std::string> oracle_topk(std::vector<std::pair<std::string, double>> pool_scores,
                                     int k) {
  std::stable_sort(pool_scores.begin(), pool_scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (const auto& [id, score] : pool_scores) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(id);
  }
  return out;
}

std::vector<std::string> oracle_greedy(const ScoreTable& table,
                                       const std::vector<std::string>& pool, int m_max) {
  std::set<std::string> remaining(pool.begin(), pool.end());
  remaining.insert(std::string(kStopId));
  std::vector<std::string> chosen;
  for (int step = 0; step < m_max; ++step) {
    std::string best_id;
    double best = 0.0;
    bool first = true;
    for (const auto& id : remaining) {  // ascending id order
      const double s = table.at({chosen, id});
      if (first || s > best) {
        best = s;
        best_id = id;
        first = false;
      }
    }
    if (best_id == kStopId) break;
    chosen.push_back(best_id);
    remaining.erase(best_id);
  }
  return chosen;
}

}  // namespace evchain
