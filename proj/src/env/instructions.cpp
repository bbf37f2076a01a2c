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

#include "duonav/env/instructions.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace duonav::env {

namespace {

using Phrases = std::vector<std::string>;

const Phrases kTurnLeft = {"turn left", "go left", "bear left", "veer left", "make a left"};
const Phrases kTurnRight = {"turn right", "go right", "bear right", "veer right", "make a right"};
const Phrases kTurnStraight = {"go straight", "continue straight", "keep straight", "head straight", "go forward"};
const Phrases kWalk = {"walk", "go", "move", "continue", "proceed"};
const Phrases kToward = {"to", "toward", "towards", "until", "up to"};
const Phrases kSideLeft = {"on your left", "on the left"};
const Phrases kSideRight = {"on your right", "on the right"};
const Phrases kSideStraight = {"straight ahead", "in front of you", "ahead"};
const Phrases kConnective = {"then", "and then", "after that", "next", "now"};
const Phrases kStop = {"and stop", "and wait", "and stop there", "and wait there"};
const Phrases kHead = {"head", "walk"};
const Phrases kFixed = {"the", ",", ".", "and", "straight", "left", "right"};

constexpr int kTemplates = 4;

const std::string& pick(const Phrases& p, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, p.size() - 1);
  return p[d(rng)];
}

const Phrases& turn_phrases(Direction d) {
  return d == Direction::Left ? kTurnLeft : d == Direction::Right ? kTurnRight : kTurnStraight;
}

const Phrases& side_phrases(Direction d) {
  return d == Direction::Left ? kSideLeft : d == Direction::Right ? kSideRight : kSideStraight;
}

std::string clause(int template_id, Direction d, const std::string& landmark, std::mt19937_64& rng) {
  switch (template_id) {
    case 0: return pick(turn_phrases(d), rng) + " and " + pick(kWalk, rng) + " " + pick(kToward, rng) + " the " + landmark;
    case 1: return pick(kWalk, rng) + " " + pick(kToward, rng) + " the " + landmark + " " + pick(side_phrases(d), rng);
    case 2: return pick(turn_phrases(d), rng) + " , " + pick(kWalk, rng) + " " + pick(kToward, rng) + " the " + landmark;
    default: return pick(kHead, rng) + " " + direction_word(d) + " " + pick(kToward, rng) + " the " + landmark;
  }
}

}  // namespace

const char* direction_word(Direction d) {
  switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Straight: return "straight";
  }
  return "straight";
}

Direction relative_direction(double previous_heading, double heading) {
  double delta = std::remainder(heading - previous_heading, 2.0 * std::numbers::pi);
  if (std::abs(delta) < std::numbers::pi / 8) return Direction::Straight;
  return delta > 0 ? Direction::Left : Direction::Right;
}

std::vector<Direction> route_directions(const NavGraph& graph, std::span<const int> path) {
  std::vector<Direction> out;
  double heading = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double next = graph.bearing(path[i], path[i + 1]);
    out.push_back(relative_direction(heading, next));
    heading = next;
  }
  return out;
}

int template_count() { return kTemplates; }

std::vector<std::string> instruction_words(int landmark_count) {
  std::set<std::string> words;
  for (const Phrases* group : {&kTurnLeft, &kTurnRight, &kTurnStraight, &kWalk, &kToward, &kSideLeft, &kSideRight,
                               &kSideStraight, &kConnective, &kStop, &kHead, &kFixed})
    for (const auto& phrase : *group) {
      std::istringstream in(phrase);
      std::string w;
      while (in >> w) words.insert(w);
    }
  std::vector<std::string> out(words.begin(), words.end());
  const auto& lex = landmark_lexicon();
  for (int i = 0; i < landmark_count; ++i) out.push_back(lex[static_cast<std::size_t>(i)]);
  return out;
}

agent::Vocabulary make_vocabulary(int landmark_count) { return agent::Vocabulary(instruction_words(landmark_count)); }

std::string synthesize_text(const NavGraph& graph, std::span<const int> path, int template_id, std::uint64_t seed) {
  if (path.size() < 2) throw std::invalid_argument("cannot describe a route without steps");
  if (template_id < 0 || template_id >= kTemplates)
    throw std::invalid_argument("template id " + std::to_string(template_id) + " out of range");
  std::mt19937_64 rng(seed);
  const auto dirs = route_directions(graph, path);
  std::string text;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (i > 0) text += " , " + pick(kConnective, rng) + " ";
    text += clause(template_id, dirs[i], graph.landmark_name(path[i + 1]), rng);
  }
  text += " " + pick(kStop, rng) + " .";
  return text;
}

agent::Instruction synthesize_instruction(const NavGraph& graph, std::span<const int> path, int template_id,
                                          std::uint64_t seed, const agent::Vocabulary& vocab) {
  const auto ids = vocab.encode(synthesize_text(graph, path, template_id, seed));
  for (int id : ids)
    if (id == agent::Vocabulary::kUnk) throw DataError("template emitted a word outside the vocabulary");
  return agent::Instruction::frame(ids);
}

}  // namespace duonav::env
