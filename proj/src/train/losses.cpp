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

#include "duonav/train/losses.hpp"

#include <stdexcept>

namespace duonav::train {

using agent::Vocabulary;
using diffcore::Mask;

const char* task_name(Task t) {
  switch (t) {
    case Task::Generation: return "IG";
    case Task::Following: return "IF";
    case Task::Matching: return "ITM";
  }
  return "?";
}

void TaskRatio::validate() const {
  if (generation < 0 || following < 0 || matching < 0) throw std::invalid_argument("task weights must be >= 0");
  if (generation + following + matching <= 0) throw std::invalid_argument("task weights must not all be zero");
}

Task sample_task(const TaskRatio& ratio, std::mt19937_64& rng) {
  ratio.validate();
  std::discrete_distribution<int> d({ratio.generation, ratio.following, ratio.matching});
  return static_cast<Task>(d(rng));
}

std::vector<int> task_groups(Task t) {
  switch (t) {
    case Task::Generation: return {agent::kRouteEncoderGroup, agent::kLanguageEncoderGroup, agent::kLanguageDecoderGroup};
    case Task::Following: return {agent::kRouteEncoderGroup, agent::kLanguageEncoderGroup, agent::kRouteDecoderGroup};
    case Task::Matching: return {agent::kRouteEncoderGroup, agent::kLanguageEncoderGroup, agent::kMatchingGroup};
  }
  return {};
}

namespace {

void check_example(const Example& ex) {
  if (!ex.route || !ex.instruction) throw std::invalid_argument("example is missing its route or instruction");
}

int masked_argmax(const diffcore::Matrix<Real>& row, const Mask* mask) {
  int best = -1;
  for (int j = 0; j < row.cols(); ++j) {
    if (mask && !(*mask)(0, j)) continue;
    if (best < 0 || row(0, j) > row(0, best)) best = j;
  }
  return best;
}

Tensor batch_mean(std::vector<Tensor>& parts) {
  Tensor total = diffcore::sum(diffcore::concat_rows<Real>(std::span<const Tensor>(parts)));
  return diffcore::scale(total, static_cast<Real>(1.0 / static_cast<double>(parts.size())));
}

}  // namespace

Tensor generation_loss(Tape& tape, const Navigator& nav, const Example& ex, LossStats* stats) {
  check_example(ex);
  const auto& tokens = ex.instruction->tokens;
  if (tokens.size() < 2) throw std::invalid_argument("instruction must be BOS/EOS framed");
  std::vector<int> input(tokens.begin(), tokens.end() - 1);
  std::vector<int> target(tokens.begin() + 1, tokens.end());
  Tensor route = nav.encode_route_generation(tape, *ex.route);
  Tensor prefix = nav.encode_language(tape, input, 0, agent::LanguageMode::Causal);
  Tensor logits = nav.word_logits(tape, prefix, route);
  if (stats) {
    const auto& v = logits.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      Eigen::Index best;
      v.row(i).maxCoeff(&best);
      stats->correct += best == target[static_cast<std::size_t>(i)] ? 1 : 0;
      ++stats->total;
    }
  }
  return diffcore::cross_entropy(logits, std::span<const int>(target));
}

Tensor following_loss(Tape& tape, const Navigator& nav, const Example& ex, LossStats* stats) {
  check_example(ex);
  const agent::Route& route = *ex.route;
  if (!route.terminal) throw std::invalid_argument("following loss needs the terminal panorama");
  const int steps = route.length();
  Tensor language = nav.encode_instruction(tape, *ex.instruction);
  Tensor states;
  if (steps > 0) states = nav.route_states(tape, route, steps);
  std::vector<Tensor> terms;
  for (int t = 0; t <= steps; ++t) {
    const agent::Panorama& pano = t < steps ? route.steps[static_cast<std::size_t>(t)].observation : *route.terminal;
    const int target = t < steps ? route.steps[static_cast<std::size_t>(t)].action : nav.stop_index();
    Tensor history;
    if (t > 0) history = diffcore::slice_rows(states, 0, t);
    Tensor enc = nav.encode_route_following(tape, t > 0 ? &history : nullptr, pano, t);
    Mask mask;
    Tensor logits = nav.action_logits(tape, enc, language, pano, t, &mask);
    if (stats) {
      stats->correct += masked_argmax(logits.value(), &mask) == target ? 1 : 0;
      ++stats->total;
    }
    const int tgt[1] = {target};
    terms.push_back(diffcore::cross_entropy(logits, std::span<const int>(tgt, 1), &mask));
  }
  return diffcore::sum(diffcore::concat_rows<Real>(std::span<const Tensor>(terms)));
}

Tensor loss_generation(Tape& tape, const Navigator& nav, std::span<const Example> batch, LossStats* stats) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<Tensor> parts;
  for (const auto& ex : batch) parts.push_back(generation_loss(tape, nav, ex, stats));
  return batch_mean(parts);
}

Tensor loss_following(Tape& tape, const Navigator& nav, std::span<const Example> batch, LossStats* stats) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<Tensor> parts;
  for (const auto& ex : batch) parts.push_back(following_loss(tape, nav, ex, stats));
  return batch_mean(parts);
}

Tensor loss_itm(Tape& tape, const Navigator& nav, std::span<const Example> batch, int offset, LossStats* stats) {
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("matching loss needs at least two pairs for negatives");
  if (offset < 1 || offset >= b) throw std::invalid_argument("negative offset must lie in [1, B-1]");
  std::vector<Tensor> routes, words;
  for (const auto& ex : batch) {
    check_example(ex);
    routes.push_back(nav.encode_route_generation(tape, *ex.route));
    words.push_back(nav.encode_instruction(tape, *ex.instruction));
  }
  std::vector<Tensor> logits;
  std::vector<Real> labels;
  for (int i = 0; i < b; ++i) {
    logits.push_back(nav.matching_logit(tape, routes[static_cast<std::size_t>(i)], words[static_cast<std::size_t>(i)]));
    labels.push_back(1);
  }
  for (int i = 0; i < b; ++i) {
    logits.push_back(
        nav.matching_logit(tape, routes[static_cast<std::size_t>((i + offset) % b)], words[static_cast<std::size_t>(i)]));
    labels.push_back(0);
  }
  Tensor all = diffcore::concat_rows<Real>(std::span<const Tensor>(logits));
  if (stats) {
    for (int i = 0; i < 2 * b; ++i) {
      const bool predicted = all.value()(i, 0) > 0;
      stats->correct += predicted == (labels[static_cast<std::size_t>(i)] > 0) ? 1 : 0;
      ++stats->total;
    }
  }
  Tensor total = diffcore::bce_with_logits(all, std::span<const Real>(labels));
  return diffcore::scale(total, static_cast<Real>(1.0 / (2.0 * b)));
}

Tensor loss_itm(Tape& tape, const Navigator& nav, std::span<const Example> batch, std::mt19937_64& rng,
                LossStats* stats) {
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("matching loss needs at least two pairs for negatives");
  std::uniform_int_distribution<int> d(1, b - 1);
  return loss_itm(tape, nav, batch, d(rng), stats);
}

Tensor task_loss(Task task, Tape& tape, const Navigator& nav, std::span<const Example> batch, std::mt19937_64& rng,
                 LossStats* stats) {
  switch (task) {
    case Task::Generation: return loss_generation(tape, nav, batch, stats);
    case Task::Following: return loss_following(tape, nav, batch, stats);
    case Task::Matching: return loss_itm(tape, nav, batch, rng, stats);
  }
  throw std::invalid_argument("unknown task");
}

Tensor joint_loss(Tape& tape, const Navigator& nav, std::span<const Example> batch, int itm_offset) {
  Tensor g = loss_generation(tape, nav, batch);
  Tensor f = loss_following(tape, nav, batch);
  Tensor m = loss_itm(tape, nav, batch, itm_offset);
  return diffcore::add(diffcore::add(g, f), m);
}

}  // namespace duonav::train
