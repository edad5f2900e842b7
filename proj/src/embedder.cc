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

#include "evchain/embedder.h"

#include <algorithm>
#include <cmath>

#include "evchain/rng.h"

namespace evchain {

EmbeddingModel::EmbeddingModel(FeatureHasher hasher, std::size_t dim_out, EncoderRole role)
    : hasher_(std::move(hasher)), role_(role), projection_({hasher_.dim(), dim_out}) {
  if (dim_out == 0) throw std::invalid_argument("embedding dim_out must be positive");
}

EmbeddingModel EmbeddingModel::random(FeatureHasher hasher, std::size_t dim_out,
                                      EncoderRole role, std::uint64_t init_seed) {
  EmbeddingModel m(std::move(hasher), dim_out, role);
  Rng rng(init_seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_out));
  for (double& v : m.projection_.data) v = rng.normal() * scale;
  m.projection_.round_to_f32();
  return m;
}

std::vector<double> EmbeddingModel::project(const SparseVector& x) const {
  std::vector<double> v(dim_out(), 0.0);
  for (const auto& [idx, value] : x.entries) {
    const auto row = projection_.row(idx);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += value * row[k];
  }
  return v;
}

Embedding normalize(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  Embedding e;
  if (norm > kZeroNormThreshold) {
    for (double& x : v) x /= norm;
    e.norm = NormFlag::kUnit;
  } else {
    std::fill(v.begin(), v.end(), 0.0);
    e.norm = NormFlag::kZero;
  }
  e.vector = std::move(v);
  return e;
}

Embedding embed(const EmbeddingModel& model, std::string_view text) {
  return normalize(model.project(model.hasher().featurize(text)));
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.norm == NormFlag::kZero || b.norm == NormFlag::kZero) return 0.0;
  const std::size_t n = std::min(a.vector.size(), b.vector.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += a.vector[i] * b.vector[i];
  return std::clamp(dot, -1.0, 1.0);
}

DualEncoder make_dual_encoder(const FeatureHasher& hasher, std::size_t dim_out,
                              std::uint64_t init_seed) {
  return DualEncoder{
      EmbeddingModel::random(hasher, dim_out, EncoderRole::kQuestion, init_seed),
      EmbeddingModel::random(hasher, dim_out, EncoderRole::kEvidence, init_seed)};
}

namespace {

const char* role_kind(EncoderRole r) {
  return r == EncoderRole::kQuestion ? "embedding:question" : "embedding:evidence";
}

}  // namespace

ModelFile to_model_file(const EmbeddingModel& model) {
  ModelFile f;
  f.kind = role_kind(model.role());
  f.hasher = model.hasher();
  f.tensors.push_back({"projection", model.projection()});
  return f;
}

EmbeddingModel embedding_model_from_file(const ModelFile& file) {
  EncoderRole role;
  if (file.kind == role_kind(EncoderRole::kQuestion)) {
    role = EncoderRole::kQuestion;
  } else if (file.kind == role_kind(EncoderRole::kEvidence)) {
    role = EncoderRole::kEvidence;
  } else {
    throw ModelFileError("expected an embedding model, found \"" + file.kind + "\"");
  }
  const Tensor& p = file.get("projection");
  if (p.shape.size() != 2 || p.rows() != file.hasher.dim())
    throw ModelFileError("projection shape does not match hasher dim");
  EmbeddingModel m(file.hasher, p.cols(), role);
  m.projection() = p;
  return m;
}

ModelFile to_model_file(const DualEncoder& encoders) {
  if (!(encoders.question.hasher() == encoders.evidence.hasher()))
    throw ModelFileError("dual encoder halves use different hashers");
  ModelFile f;
  f.kind = "dual-encoder";
  f.hasher = encoders.question.hasher();
  f.tensors.push_back({"question.projection", encoders.question.projection()});
  f.tensors.push_back({"evidence.projection", encoders.evidence.projection()});
  return f;
}

DualEncoder dual_encoder_from_file(const ModelFile& file) {
  if (file.kind != "dual-encoder")
    throw ModelFileError("expected a dual-encoder model, found \"" + file.kind + "\"");
  auto load = [&](const std::string& name, EncoderRole role) {
    const Tensor& p = file.get(name);
    if (p.shape.size() != 2 || p.rows() != file.hasher.dim())
      throw ModelFileError(name + " shape does not match hasher dim");
    EmbeddingModel m(file.hasher, p.cols(), role);
    m.projection() = p;
    return m;
  };
  return DualEncoder{load("question.projection", EncoderRole::kQuestion),
                     load("evidence.projection", EncoderRole::kEvidence)};
}

}  // namespace evchain
