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
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evchain/tensor_file.h"

namespace evchain {

enum class Schedule { kLinearDecay };

/// Shared optimisation settings for both trainable stages.
struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 2e-4;
  int epochs = 5;
  /// Softmax temperature of the contrastive loss; unused by the refiner.
  double temperature = 1.0;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  Schedule schedule = Schedule::kLinearDecay;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adaptive moments with decoupled weight decay. Slots flagged `decay` get
/// the decay term; biases typically are not.
class AdamW {
 public:
  struct Slot {
    Tensor* param;
    bool decay;
  };

  AdamW(std::vector<Slot> slots, AdamWConfig cfg);

  /// grads[i] must match slots[i] in shape.
  void step(std::span<const Tensor> grads, double learning_rate);
  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Slot> slots_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

/// base * (1 - step / total_steps), step counted from 0.
double linear_decay_lr(double base, std::int64_t step, std::int64_t total_steps);

struct LossRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;

  bool operator==(const LossRecord&) const = default;
};

/// Header `step,epoch,loss,learning_rate`; values printed round-trip exact.
void write_loss_csv(std::span<const LossRecord> history, std::ostream& out);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& stage, std::int64_t step);
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace evchain
