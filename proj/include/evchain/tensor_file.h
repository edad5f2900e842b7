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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evchain/text.h"

namespace evchain {

/// Dense row-major tensor. Parameters are held in double precision while
/// training; persisted models carry 32-bit floats, so finished models are
/// narrowed with `round_to_f32` before they are handed out.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_in);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }

  void fill(double v);
  bool all_finite() const;
  void round_to_f32();

  bool operator==(const Tensor&) const = default;
};

class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Self-describing model container:
///
///   "EVCT" | u32 version | str kind | u32 dim | u32 n_orders | i32 orders[]
///   | u64 seed | u32 n_tensors | { str name | u32 ndim | u64 dims[] | f32 data[] }*
///
/// All integers and floats little-endian; str = u32 length + UTF-8 bytes.
struct ModelFile {
  std::uint32_t version = kModelFormatVersion;
  std::string kind;
  FeatureHasher hasher;
  std::vector<NamedTensor> tensors;

  const Tensor& get(const std::string& name) const;
};

std::vector<std::uint8_t> encode_model_file(const ModelFile& file);
ModelFile decode_model_file(std::span<const std::uint8_t> bytes);

void save_model_file(const ModelFile& file, const std::string& path);
ModelFile load_model_file(const std::string& path);

}  // namespace evchain
