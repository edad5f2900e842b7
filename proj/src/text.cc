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

#include "evchain/text.h"

#include <algorithm>
#include <stdexcept>

namespace evchain {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    const bool word = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
                      (u >= '0' && u <= '9') || u >= 0x80;
    if (word) {
      current.push_back((u >= 'A' && u <= 'Z') ? static_cast<char>(u - 'A' + 'a') : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h ^ bytes.size());
}

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * v;
  return s;
}

SparseVector SparseVector::from_unsorted(std::vector<std::pair<std::uint32_t, double>> raw) {
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector out;
  out.entries.reserve(raw.size());
  for (const auto& [i, v] : raw) {
    if (!out.entries.empty() && out.entries.back().first == i) {
      out.entries.back().second += v;
    } else {
      out.entries.emplace_back(i, v);
    }
  }
  std::erase_if(out.entries, [](const auto& e) { return e.second == 0.0; });
  return out;
}

FeatureHasher::FeatureHasher(std::uint32_t dim, std::vector<int> ngram_orders,
                             std::uint64_t seed)
    : dim_(dim), orders_(std::move(ngram_orders)), seed_(seed) {
  if (dim_ < 2) throw std::invalid_argument("feature hasher dim must be >= 2");
  if (orders_.empty()) throw std::invalid_argument("feature hasher needs an n-gram order");
  for (int n : orders_) {
    if (n < 1) throw std::invalid_argument("n-gram orders must be positive");
  }
}

std::pair<std::uint32_t, double> FeatureHasher::slot(std::string_view key) const {
  const std::uint64_t h = hash64(key, seed_);
  const auto bucket = static_cast<std::uint32_t>(h % dim_);
  // Sign comes from an independent hash so it is uncorrelated with the bucket.
  const double sign = (mix64(h ^ 0x9e3779b97f4a7c15ULL) >> 63) ? -1.0 : 1.0;
  return {bucket, sign};
}

SparseVector FeatureHasher::featurize_tokens(const std::vector<std::string>& tokens) const {
  std::vector<std::pair<std::uint32_t, double>> raw;
  std::string key;
  for (int n : orders_) {
    const auto order = static_cast<std::size_t>(n);
    if (tokens.size() < order) continue;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      key.clear();
      key += static_cast<char>('0' + n % 10);
      for (std::size_t j = 0; j < order; ++j) {
        key += '\x1f';
        key += tokens[i + j];
      }
      raw.push_back(slot(key));
    }
  }
  return SparseVector::from_unsorted(std::move(raw));
}

SparseVector FeatureHasher::featurize(std::string_view text) const {
  return featurize_tokens(tokenize(text));
}

}  // namespace evchain
