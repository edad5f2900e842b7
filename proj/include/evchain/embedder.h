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
#include <vector>

#include "evchain/tensor_file.h"
#include "evchain/text.h"

namespace evchain {

enum class EncoderRole { kQuestion, kEvidence };
enum class NormFlag { kUnit, kZero };

struct Embedding {
  std::vector<double> vector;
  NormFlag norm = NormFlag::kZero;

  bool operator==(const Embedding&) const = default;
};

/// Hashed n-gram features followed by a linear projection (dim x dim_out).
class EmbeddingModel {
 public:
  EmbeddingModel(FeatureHasher hasher, std::size_t dim_out, EncoderRole role);

  /// Projection entries drawn i.i.d. N(0, 1/dim_out) and narrowed to f32.
  static EmbeddingModel random(FeatureHasher hasher, std::size_t dim_out, EncoderRole role,
                               std::uint64_t init_seed);

  const FeatureHasher& hasher() const { return hasher_; }
  EncoderRole role() const { return role_; }
  std::size_t dim_out() const { return projection_.cols(); }
  Tensor& projection() { return projection_; }
  const Tensor& projection() const { return projection_; }

  /// projection^T x, before normalization.
  std::vector<double> project(const SparseVector& x) const;

  bool operator==(const EmbeddingModel&) const = default;

 private:
  FeatureHasher hasher_;
  EncoderRole role_;
  Tensor projection_;
};

/// Below this norm the projected vector is treated as the zero embedding.
inline constexpr double kZeroNormThreshold = 1e-12;

Embedding normalize(std::vector<double> v);
Embedding embed(const EmbeddingModel& model, std::string_view text);

/// Cosine matching score of two embeddings; 0 when either is the zero
/// embedding, clamped to [-1, 1].
double cosine(const Embedding& a, const Embedding& b);

/// The two encoders of the initial screening stage.
struct DualEncoder {
  EmbeddingModel question;
  EmbeddingModel evidence;

  bool operator==(const DualEncoder&) const = default;
};

/// Separate parameter sets initialised from the same draw.
DualEncoder make_dual_encoder(const FeatureHasher& hasher, std::size_t dim_out,
                              std::uint64_t init_seed);

ModelFile to_model_file(const EmbeddingModel& model);
EmbeddingModel embedding_model_from_file(const ModelFile& file);

ModelFile to_model_file(const DualEncoder& encoders);
DualEncoder dual_encoder_from_file(const ModelFile& file);

}  // namespace evchain
