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

#ifndef DUONAV_TESTS_FIXTURES_HPP
#define DUONAV_TESTS_FIXTURES_HPP

#include <string>
#include <vector>

#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/train/trainer.hpp"

namespace duonav::testing {

inline env::DatasetConfig small_dataset(int nodes = 12, int train_graphs = 2, int unseen_graphs = 1) {
  env::DatasetConfig dc;
  dc.world.nodes = nodes;
  dc.train_graphs = train_graphs;
  dc.unseen_graphs = unseen_graphs;
  dc.min_route_steps = 2;
  dc.max_route_steps = 4;
  return dc;
}

inline agent::ModelConfig small_model(const env::World& world, int width = 8, int heads = 2, int depth = 1) {
  agent::ModelConfig mc;
  mc.attention.width = width;
  mc.attention.heads = heads;
  mc.attention.language_encoder_depth = depth;
  mc.attention.route_encoder_depth = depth;
  mc.attention.language_decoder_depth = depth;
  mc.attention.route_decoder_depth = depth;
  mc.views = world.config().world.views;
  mc.visual_dim = world.config().world.visual_dim;
  mc.vocab_size = world.vocabulary().size();
  return mc;
}

/// A world with resolved training samples.
struct SmallCorpus {
  env::World world;
  std::vector<env::PairRecord> records;
  std::vector<env::Sample> samples;
  std::vector<train::Example> examples;

  SmallCorpus(int routes, std::uint64_t seed, env::DatasetConfig dc = small_dataset())
      : world(dc, seed), records(env::make_split(world, env::Split::Train, routes, seed + 1)) {
    samples = env::resolve(world, records);
    for (const auto& s : samples) examples.push_back({&s.route, &s.record->instruction});
  }
};

inline void set_all(agent::ParamStore& store, double value) {
  store.for_each([&](agent::Param& p) { p.value.setConstant(static_cast<Real>(value)); });
}

inline agent::Param& param(agent::Navigator& nav, const std::string& name) {
  auto* p = nav.parameters().find(name);
  if (!p) throw std::out_of_range("no parameter " + name);
  return *p;
}

}  // namespace duonav::testing

#endif  // DUONAV_TESTS_FIXTURES_HPP
