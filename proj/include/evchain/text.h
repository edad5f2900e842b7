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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evchain {

/// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Seeded 64-bit hash with a stable definition across platforms and builds.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed);

/// Sparse vector with strictly increasing indices and no explicit zeros.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
  double squared_norm() const;
  bool operator==(const SparseVector&) const = default;

  /// Sorts by index, merges duplicates and drops zeros.
  static SparseVector from_unsorted(std::vector<std::pair<std::uint32_t, double>> raw);
};

/// Signed n-gram feature hashing. The key of an n-gram is the digit n
/// followed by each token prefixed with 0x1f.
class FeatureHasher {
 public:
  FeatureHasher(std::uint32_t dim = 4096, std::vector<int> ngram_orders = {1, 2},
                std::uint64_t seed = 0x5eedf00dULL);

  std::uint32_t dim() const { return dim_; }
  const std::vector<int>& ngram_orders() const { return orders_; }
  std::uint64_t seed() const { return seed_; }

  SparseVector featurize(std::string_view text) const;
  SparseVector featurize_tokens(const std::vector<std::string>& tokens) const;

  /// Bucket and sign for one feature key. Used for n-grams and for named
  /// real-valued side features.
  std::pair<std::uint32_t, double> slot(std::string_view key) const;

  bool operator==(const FeatureHasher&) const = default;

 private:
  std::uint32_t dim_;
  std::vector<int> orders_;
  std::uint64_t seed_;
};

}  // namespace evchain
