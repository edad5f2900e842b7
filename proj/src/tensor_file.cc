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

#include "evchain/tensor_file.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

namespace evchain {

Tensor::Tensor(std::vector<std::size_t> shape_in) : shape(std::move(shape_in)) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, 0.0);
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::round_to_f32() {
  for (double& v : data) v = static_cast<double>(static_cast<float>(v));
}

const Tensor& ModelFile::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ModelFileError("model file has no tensor \"" + name + "\"");
}

namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(4);
    if (!std::equal(kMagic, kMagic + 4, bytes_.begin() + static_cast<std::ptrdiff_t>(pos_)))
      throw ModelFileError("not a model file (bad magic)");
    pos_ += 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ModelFileError("model file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model_file(const ModelFile& file) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(file.version);
  w.str(file.kind);
  w.u32(file.hasher.dim());
  w.u32(static_cast<std::uint32_t>(file.hasher.ngram_orders().size()));
  for (int n : file.hasher.ngram_orders()) w.u32(static_cast<std::uint32_t>(n));
  w.u64(file.hasher.seed());
  w.u32(static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& [name, t] : file.tensors) {
    if (!t.all_finite()) throw ModelFileError("tensor \"" + name + "\" is not finite");
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.u64(d);
    for (double v : t.data) w.f32(v);
  }
  return w.take();
}

ModelFile decode_model_file(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic();
  ModelFile file;
  file.version = r.u32();
  if (file.version != kModelFormatVersion)
    throw ModelFileError("unsupported model format version " + std::to_string(file.version));
  file.kind = r.str();
  const std::uint32_t dim = r.u32();
  const std::uint32_t n_orders = r.u32();
  if (n_orders > 16) throw ModelFileError("implausible n-gram order count");
  std::vector<int> orders;
  for (std::uint32_t i = 0; i < n_orders; ++i) orders.push_back(static_cast<int>(r.u32()));
  const std::uint64_t seed = r.u64();
  try {
    file.hasher = FeatureHasher(dim, orders, seed);
  } catch (const std::invalid_argument& e) {
    throw ModelFileError(std::string("bad hasher config: ") + e.what());
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor nt;
    nt.name = r.str();
    const std::uint32_t ndim = r.u32();
    if (ndim > 8) throw ModelFileError("implausible tensor rank");
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<std::size_t>(r.u64()));
      count *= shape.back();
    }
    if (count > bytes.size()) throw ModelFileError("model file truncated");
    nt.tensor = Tensor(std::move(shape));
    for (double& v : nt.tensor.data) v = r.f32();
    file.tensors.push_back(std::move(nt));
  }
  if (!r.done()) throw ModelFileError("trailing bytes after model payload");
  return file;
}

void save_model_file(const ModelFile& file, const std::string& path) {
  const auto bytes = encode_model_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelFileError("cannot write model file \"" + path + "\"");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelFileError("failed writing model file \"" + path + "\"");
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open model file \"" + path + "\"");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_model_file(bytes);
}

}  // namespace evchain
