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

#include "duonav/agent/types.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace duonav::agent {

std::array<double, 4> ViewObservation::orientation_from(double heading, double elevation) {
  return {std::cos(heading), std::sin(heading), std::cos(elevation), std::sin(elevation)};
}

int Panorama::navigable_count() const {
  int n = 0;
  for (bool b : navigable) n += b ? 1 : 0;
  return n;
}

void Panorama::validate(int visual_dim) const {
  if (views.empty()) throw std::invalid_argument("panorama has no views");
  if (navigable.size() != views.size()) throw std::invalid_argument("navigable flags do not match view count");
  if (navigable_count() < 1) throw std::invalid_argument("panorama has no navigable view");
  for (const auto& v : views) {
    if (static_cast<int>(v.visual.size()) != visual_dim) throw std::invalid_argument("visual feature size mismatch");
    const auto& o = v.orientation;
    if (std::abs(o[0] * o[0] + o[1] * o[1] - 1.0) > 1e-9 || std::abs(o[2] * o[2] + o[3] * o[3] - 1.0) > 1e-9)
      throw std::invalid_argument("orientation is not a pair of unit angles");
  }
}

void Route::validate() const {
  for (const auto& s : steps)
    if (!s.observation.is_navigable(s.action))
      throw ActionError("route action " + std::to_string(s.action) + " is not navigable");
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  tokens_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (const auto& w : words) {
    if (index_.count(w) || w == "<pad>" || w == "<unk>" || w == "<bos>" || w == "<eos>") continue;
    tokens_.push_back(w);
  }
  for (int i = 0; i < size(); ++i) index_[tokens_[static_cast<std::size_t>(i)]] = i;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::istringstream in(text);
  std::vector<int> ids;
  std::string w;
  while (in >> w) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kBos || i == kEos || i == kPad) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

Instruction Instruction::frame(std::span<const int> words) {
  Instruction ins;
  ins.tokens.reserve(words.size() + 2);
  ins.tokens.push_back(Vocabulary::kBos);
  ins.tokens.insert(ins.tokens.end(), words.begin(), words.end());
  ins.tokens.push_back(Vocabulary::kEos);
  return ins;
}

std::vector<int> Instruction::words() const {
  if (tokens.size() < 2) return {};
  return std::vector<int>(tokens.begin() + 1, tokens.end() - 1);
}

void Instruction::validate(int vocab_size) const {
  if (tokens.size() < 2 || tokens.front() != Vocabulary::kBos || tokens.back() != Vocabulary::kEos)
    throw std::invalid_argument("instruction must be framed by BOS/EOS");
  for (int t : tokens)
    if (t < 0 || t >= vocab_size) throw std::out_of_range("instruction token outside vocabulary");
}

int Distribution::argmax() const {
  int best = 0;
  for (int i = 1; i < size(); ++i)
    if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
  return best;
}

double Distribution::sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

void Distribution::validate(double tol) const {
  for (double p : probs)
    if (!(p >= 0.0)) throw std::domain_error("distribution has a negative entry");
  if (std::abs(sum() - 1.0) > tol) throw std::domain_error("distribution does not sum to one");
}

}  // namespace duonav::agent
