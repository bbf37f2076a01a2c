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

#ifndef DUONAV_ENV_INSTRUCTIONS_HPP
#define DUONAV_ENV_INSTRUCTIONS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "duonav/agent/types.hpp"
#include "duonav/env/nav_graph.hpp"

namespace duonav::env {

enum class Direction { Straight, Left, Right };

const char* direction_word(Direction d);

/// Turn implied by moving along `heading` after facing `previous_heading`:
/// straight within pi/8, left for a counter-clockwise turn, right otherwise.
Direction relative_direction(double previous_heading, double heading);

/// Turn for each step of a node path. The agent starts facing heading 0.
std::vector<Direction> route_directions(const NavGraph& graph, std::span<const int> path);

int template_count();

/// Every word the templates can emit for a world with `landmark_count`
/// landmarks, in a fixed order.
std::vector<std::string> instruction_words(int landmark_count);
agent::Vocabulary make_vocabulary(int landmark_count);

/// Surface text for a route; a pure function of (path, template, seed).
std::string synthesize_text(const NavGraph& graph, std::span<const int> path, int template_id, std::uint64_t seed);

/// Tokenised, BOS/EOS-framed form of synthesize_text().
agent::Instruction synthesize_instruction(const NavGraph& graph, std::span<const int> path, int template_id,
                                          std::uint64_t seed, const agent::Vocabulary& vocab);

}  // namespace duonav::env

#endif  // DUONAV_ENV_INSTRUCTIONS_HPP
