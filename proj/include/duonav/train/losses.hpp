/*
 * Copyright 2026 The duonav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DUONAV_TRAIN_LOSSES_HPP
#define DUONAV_TRAIN_LOSSES_HPP

#include <random>
#include <span>
#include <string>
#include <vector>

#include "duonav/agent/navigator.hpp"

namespace duonav::train {

using agent::Navigator;
using agent::Tape;
using agent::Tensor;

enum class Task : int { Generation = 0, Following = 1, Matching = 2 };

const char* task_name(Task t);

/// Sampling weights for IG, IF and ITM.
struct TaskRatio {
  double generation = 4;
  double following = 1;
  double matching = 2;

  static TaskRatio pretrain() { return {4, 1, 2}; }
  static TaskRatio finetune() { return {2, 5, 0}; }
  void validate() const;
};

/// One categorical draw proportional to the ratio.
Task sample_task(const TaskRatio& ratio, std::mt19937_64& rng);

/// Parameter groups a task updates: both encoders plus its own head.
std::vector<int> task_groups(Task t);

struct Example {
  const agent::Route* route = nullptr;
  const agent::Instruction* instruction = nullptr;
};

/// Teacher-forced prediction counts collected alongside a loss.
struct LossStats {
  int correct = 0;
  int total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// -sum_{l=1}^{L+1} log q_l(x_l) for one pair, computed in parallel over the
/// BOS-shifted instruction.
Tensor generation_loss(Tape& tape, const Navigator& nav, const Example& ex, LossStats* stats = nullptr);

/// -sum_t log p_t(a_t) along the expert route, with STOP as the target at
/// the terminal panorama.
Tensor following_loss(Tape& tape, const Navigator& nav, const Example& ex, LossStats* stats = nullptr);

/// Batch means of the per-pair losses.
Tensor loss_generation(Tape& tape, const Navigator& nav, std::span<const Example> batch, LossStats* stats = nullptr);
Tensor loss_following(Tape& tape, const Navigator& nav, std::span<const Example> batch, LossStats* stats = nullptr);

/// Binary cross-entropy over B aligned pairs and B negatives built by pairing
/// instruction i with route (i + offset) mod B; mean over the 2B terms.
Tensor loss_itm(Tape& tape, const Navigator& nav, std::span<const Example> batch, int offset,
                LossStats* stats = nullptr);
/// Same with the offset drawn uniformly from [1, B-1].
Tensor loss_itm(Tape& tape, const Navigator& nav, std::span<const Example> batch, std::mt19937_64& rng,
                LossStats* stats = nullptr);

Tensor task_loss(Task task, Tape& tape, const Navigator& nav, std::span<const Example> batch, std::mt19937_64& rng,
                 LossStats* stats = nullptr);

/// L^g + L^f + L^itm on one batch, with a fixed negative offset.
Tensor joint_loss(Tape& tape, const Navigator& nav, std::span<const Example> batch, int itm_offset = 1);

}  // namespace duonav::train

#endif  // DUONAV_TRAIN_LOSSES_HPP
