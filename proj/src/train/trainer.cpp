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

#include "duonav/train/trainer.hpp"

#include <chrono>
#include <numeric>
#include <sstream>

#include "duonav/io/checkpoint.hpp"

namespace duonav::train {

const char* phase_name(Phase p) { return p == Phase::Pretrain ? "pretrain" : "finetune"; }

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::MultiTask: return "mt";
    case Regime::SingleFollowing: return "st-if";
    case Regime::SingleGeneration: return "st-ig";
  }
  return "mt";
}

Regime parse_regime(const std::string& name) {
  if (name == "mt") return Regime::MultiTask;
  if (name == "st-if") return Regime::SingleFollowing;
  if (name == "st-ig") return Regime::SingleGeneration;
  throw std::invalid_argument("unknown regime '" + name + "' (mt, st-if, st-ig)");
}

TrainConfig TrainConfig::pretrain_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig c;
  c.phase = Phase::Finetune;
  c.lr = 1e-5;
  c.batch_size = 8;
  c.ratio = TaskRatio::finetune();
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  effective_ratio().validate();
}

TaskRatio TrainConfig::effective_ratio() const {
  switch (regime) {
    case Regime::MultiTask: return ratio;
    case Regime::SingleFollowing: return {0, 1, 0};
    case Regime::SingleGeneration: return {1, 0, 0};
  }
  return ratio;
}

Trainer::Trainer(agent::Navigator& nav, std::vector<Example> data, TrainConfig config)
    : nav_(nav),
      data_(std::move(data)),
      config_(config),
      ratio_(config.effective_ratio()),
      adam_(nav.parameters(), AdamConfig{config.lr, 0.9, 0.999, 1e-8, config.clip_norm}),
      rng_(config.seed) {
  config_.validate();
  if (data_.empty()) throw std::invalid_argument("training data is empty");
  if (ratio_.matching > 0 && data_.size() < 2)
    throw std::invalid_argument("the matching task needs at least two training pairs");
}

std::vector<Example> Trainer::draw_batch() {
  const std::size_t n = data_.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(config_.batch_size), n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(idx[i], idx[d(rng_)]);
  }
  std::vector<Example> batch;
  for (std::size_t i = 0; i < b; ++i) batch.push_back(data_[idx[i]]);
  return batch;
}

IterationLog Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  IterationLog log;
  log.iteration = iteration_;
  log.task = sample_task(ratio_, rng_);
  const auto batch = draw_batch();
  nav_.parameters().zero_grad();
  LossStats stats;
  {
    agent::Tape tape(true);
    agent::Tensor loss = task_loss(log.task, tape, nav_, batch, rng_, &stats);
    log.loss = static_cast<double>(loss.item());
    tape.backward(loss);
  }
  const auto groups = task_groups(log.task);
  log.grad_norm = adam_.step(groups);
  log.accuracy = stats.accuracy();
  ++iteration_;
  log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return log;
}

void Trainer::run(const std::function<void(const IterationLog&)>& on_step) {
  while (iteration_ < config_.iterations) {
    IterationLog log = step();
    if (on_step) on_step(log);
  }
}

void Trainer::save_state(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io::CheckpointError("cannot write " + path.string());
  out.write("LOPT", 4);
  const std::int64_t it = iteration_;
  out.write(reinterpret_cast<const char*>(&it), sizeof(it));
  std::ostringstream rng_text;
  rng_text << rng_;
  const std::string s = rng_text.str();
  const std::uint64_t len = s.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(len));
  adam_.save(out);
  if (!out) throw io::CheckpointError("failed writing " + path.string());
}

void Trainer::load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::CheckpointError("cannot read optimizer state " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "LOPT") throw io::CheckpointError(path.string() + " is not an optimizer state");
  std::int64_t it = 0;
  in.read(reinterpret_cast<char*>(&it), sizeof(it));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 20)) throw io::CheckpointError("corrupt optimizer state " + path.string());
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  std::istringstream rng_text(s);
  rng_text >> rng_;
  if (!in || !rng_text) throw io::CheckpointError("corrupt RNG state in " + path.string());
  try {
    adam_.load(in);
  } catch (const std::runtime_error& e) {
    throw io::CheckpointError(e.what());
  }
  iteration_ = it;
}

LossLog::LossLog(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot write loss log " + path.string());
  if (!append || std::filesystem::file_size(path) == 0) out_ << "iteration,task,loss,wall_ms\n";
}

void LossLog::write(const IterationLog& row) {
  if (!out_.is_open()) return;
  out_ << row.iteration << ',' << task_name(row.task) << ',';
  out_.precision(17);
  out_ << row.loss << ',';
  out_.precision(6);
  out_ << row.wall_ms << '\n';
}

void save_training_checkpoint(const std::filesystem::path& path, const agent::Navigator& nav, const Trainer& trainer,
                              const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["phase"] = phase_name(trainer.config().phase);
  meta["regime"] = regime_name(trainer.config().regime);
  meta["iteration"] = trainer.iteration();
  io::save_model(path, nav, meta);
  trainer.save_state(io::optimizer_path(path));
}

void load_training_checkpoint(const std::filesystem::path& path, agent::Navigator& nav, Trainer& trainer) {
  io::load_parameters(path, nav.parameters());
  trainer.load_state(io::optimizer_path(path));
}

}  // namespace duonav::train
