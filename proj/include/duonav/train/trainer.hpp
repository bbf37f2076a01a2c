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

#ifndef DUONAV_TRAIN_TRAINER_HPP
#define DUONAV_TRAIN_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duonav/train/losses.hpp"
#include "duonav/train/optimizer.hpp"

namespace duonav::train {

enum class Phase { Pretrain, Finetune };

/// Fine-tuning regimes: both tasks, or one task only.
enum class Regime { MultiTask, SingleFollowing, SingleGeneration };

const char* phase_name(Phase p);
const char* regime_name(Regime r);
Regime parse_regime(const std::string& name);

struct TrainConfig {
  Phase phase = Phase::Pretrain;
  double lr = 1e-4;
  int batch_size = 32;
  int iterations = 1000;
  TaskRatio ratio = TaskRatio::pretrain();
  Regime regime = Regime::MultiTask;
  std::uint64_t seed = 0;
  /// Save a checkpoint every this many iterations (0 = only at the end).
  int checkpoint_every = 0;
  double clip_norm = 5.0;

  static TrainConfig pretrain_defaults();
  static TrainConfig finetune_defaults();
  void validate() const;
  /// The ratio after applying the regime (single-task regimes zero the others).
  TaskRatio effective_ratio() const;
};

struct IterationLog {
  std::int64_t iteration = 0;
  Task task = Task::Generation;
  double loss = 0;
  double accuracy = 0;
  double grad_norm = 0;
  double wall_ms = 0;
};

/// Multi-task loop: per iteration draw one task, draw one mini-batch, take
/// the batch-mean loss for that task and update the encoders plus that
/// task's head.
class Trainer {
 public:
  Trainer(agent::Navigator& nav, std::vector<Example> data, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }
  Adam& optimizer() { return adam_; }

  IterationLog step();
  /// Runs until `config().iterations` is reached, calling `on_step` after each.
  void run(const std::function<void(const IterationLog&)>& on_step = {});

  /// Optimizer moments, RNG state and iteration counter.
  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

 private:
  std::vector<Example> draw_batch();

  agent::Navigator& nav_;
  std::vector<Example> data_;
  TrainConfig config_;
  TaskRatio ratio_;
  Adam adam_;
  std::mt19937_64 rng_;
  std::int64_t iteration_ = 0;
};

/// CSV loss log with columns iteration, task, loss, wall_ms.
class LossLog {
 public:
  LossLog() = default;
  LossLog(const std::filesystem::path& path, bool append);
  void write(const IterationLog& row);

 private:
  std::ofstream out_;
};

/// Parameters + manifest + optimizer sidecar.
void save_training_checkpoint(const std::filesystem::path& path, const agent::Navigator& nav, const Trainer& trainer,
                              const nlohmann::json& extra);
/// Restores parameters and trainer state saved by save_training_checkpoint.
void load_training_checkpoint(const std::filesystem::path& path, agent::Navigator& nav, Trainer& trainer);

}  // namespace duonav::train

#endif  // DUONAV_TRAIN_TRAINER_HPP
