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
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evchain/corpus.h"

namespace evchain {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const PRF&) const = default;
};

/// Set precision/recall/F1 of retrieved ids against gold ids. Throws
/// std::invalid_argument for an empty gold set.
PRF retrieval_prf(const std::set<std::string>& retrieved, const std::set<std::string>& gold);

struct AnswerScore {
  int em = 0;
  double token_f1 = 0.0;
};

/// Lowercase, strip ASCII punctuation, optionally drop a/an/the, collapse
/// whitespace.
std::string normalize_answer(std::string_view text, bool drop_articles = true);

/// Exact match and bag-of-tokens F1 (with multiplicity) after normalisation.
AnswerScore answer_em_f1(std::string_view prediction, std::string_view reference,
                         bool drop_articles = true);

/// Sum of ascending-sorted values divided by count; 0 for no values. The
/// result does not depend on input order.
double order_independent_mean(std::vector<double> values);

struct RetrievalReport {
  std::map<std::string, PRF> per_qid;
  PRF mean;
};

struct QAReport {
  std::map<std::string, AnswerScore> per_qid;
  double mean_em = 0.0;
  double mean_token_f1 = 0.0;
};

/// retrieved[qid] scored against the gold ids of the matching instance.
RetrievalReport make_retrieval_report(const std::map<std::string, std::vector<std::string>>& retrieved,
                                      std::span<const QAInstance> instances);
QAReport make_qa_report(const std::map<std::string, std::string>& predictions,
                        std::span<const QAInstance> instances, bool drop_articles = true);

/// {"per_qid":{...},"mean":{...}}
std::string to_json(const RetrievalReport& report);
std::string to_json(const QAReport& report);

struct SynthConfig {
  int n_instances = 100;
  int pool_size_per_q = 50;
  double bridge_fraction = 0.5;
  int vocab_size = 2000;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Cue-token pairs that tie a bridge question to its second-hop source
/// without sharing a token.
inline constexpr int kSynthRelations = 8;

/// Planted multi-hop corpus. Single-hop instances have one gold source that
/// shares four tokens with the question. Bridge instances have two ordered
/// gold sources: the first shares four tokens with the question, the second
/// shares none and is linked to the first by a token no other source holds.
/// Distractors share at most one question token and no other gold token.
/// Throws std::invalid_argument when the vocabulary cannot hold a unique
/// bridge token per bridge instance.
Corpus gen_synthetic(const SynthConfig& cfg);

/// Test oracle: full stable sort by (-score, id), truncated to k.
std::vector<std::string> oracle_topk(std::vector<std::pair<std::string, double>> pool_scores,
                                     int k);

/// Key: (selected prefix in order, candidate id).
using ScoreTable = std::map<std::pair<std::vector<std::string>, std::string>, double>;

/// Test oracle for greedy chain selection, by explicit stepwise enumeration.
/// Throws std::out_of_range when the table lacks a needed entry.
std::vector<std::string> oracle_greedy(const ScoreTable& table,
                                       const std::vector<std::string>& pool, int m_max);

}  // namespace evchain
