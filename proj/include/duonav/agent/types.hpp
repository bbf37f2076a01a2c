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

#ifndef DUONAV_AGENT_TYPES_HPP
#define DUONAV_AGENT_TYPES_HPP

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace duonav::agent {

/// Step index at or beyond the temporal-embedding table.
class HorizonError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Action that does not select a navigable view.
class ActionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No legal decision exists (no navigable view and stopping not yet allowed).
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One discretised view: visual features plus (cos h, sin h, cos e, sin e).
struct ViewObservation {
  std::vector<double> visual;
  std::array<double, 4> orientation{1.0, 0.0, 1.0, 0.0};

  static std::array<double, 4> orientation_from(double heading, double elevation);
};

/// The K views visible at one step.
struct Panorama {
  std::vector<ViewObservation> views;
  std::vector<bool> navigable;

  int size() const { return static_cast<int>(views.size()); }
  int navigable_count() const;
  bool is_navigable(int view) const { return view >= 0 && view < size() && navigable[static_cast<std::size_t>(view)]; }

  /// Throws std::invalid_argument on inconsistent sizes or invalid orientations.
  void validate(int visual_dim) const;
};

struct RouteStep {
  Panorama observation;
  int action = 0;
};

/// Sequence of (panorama, action) pairs. `terminal` is the panorama at the
/// node where the route ends; it is where a demonstrator chooses STOP.
struct Route {
  std::vector<RouteStep> steps;
  std::optional<Panorama> terminal;

  int length() const { return static_cast<int>(steps.size()); }
  void validate() const;
};

/// Fixed vocabulary with four reserved ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSpecials = 4;

  Vocabulary() = default;
  explicit Vocabulary(const std::vector<std::string>& words);

  int size() const { return static_cast<int>(tokens_.size()); }
  int word_count() const { return size() - kSpecials; }
  int id(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) > 0; }
  const std::string& token(int id) const;
  std::vector<int> encode(const std::string& text) const;
  std::string decode(std::span<const int> ids) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Token ids framed as [BOS, x_1 .. x_L, EOS].
struct Instruction {
  std::vector<int> tokens;

  static Instruction frame(std::span<const int> words);
  /// x_1 .. x_L without the framing tokens.
  std::vector<int> words() const;
  int length() const { return static_cast<int>(tokens.size()) - 2; }
  void validate(int vocab_size) const;
};

/// Probability vector on the simplex.
struct Distribution {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }
  /// First index of the maximum.
  int argmax() const;
  double sum() const;
  /// Throws if any entry is negative or the mass differs from 1 by more than tol.
  void validate(double tol = 1e-9) const;
};

}  // namespace duonav::agent

#endif  // DUONAV_AGENT_TYPES_HPP
