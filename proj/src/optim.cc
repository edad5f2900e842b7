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

#include "evchain/optim.h"

#include <cmath>
#include <cstdio>

namespace evchain {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
}

AdamW::AdamW(std::vector<Slot> slots, AdamWConfig cfg) : slots_(std::move(slots)), cfg_(cfg) {
  for (const Slot& s : slots_) {
    m_.emplace_back(s.param->shape);
    v_.emplace_back(s.param->shape);
  }
}

void AdamW::step(std::span<const Tensor> grads, double learning_rate) {
  if (grads.size() != slots_.size())
    throw std::invalid_argument("AdamW::step: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    Tensor& p = *slots_[s].param;
    const Tensor& g = grads[s];
    if (g.size() != p.size()) throw std::invalid_argument("AdamW::step: shape mismatch");
    const double decay = slots_[s].decay ? cfg_.weight_decay : 0.0;
    double* m = m_[s].data.data();
    double* v = v_[s].data.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      p.data[i] -= learning_rate * (update + decay * p.data[i]);
    }
  }
}

double linear_decay_lr(double base, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base;
  return base * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

void write_loss_csv(std::span<const LossRecord> history, std::ostream& out) {
  out << "step,epoch,loss,learning_rate\n";
  char buf[64];
  for (const LossRecord& r : history) {
    out << r.step << ',' << r.epoch << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.learning_rate);
    out << buf << '\n';
  }
}

TrainingDiverged::TrainingDiverged(const std::string& stage, std::int64_t step)
    : std::runtime_error(stage + " training produced a non-finite loss at step " +
                         std::to_string(step)),
      step_(step) {}

}  // namespace evchain
