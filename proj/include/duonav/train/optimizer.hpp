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

#ifndef DUONAV_TRAIN_OPTIMIZER_HPP
#define DUONAV_TRAIN_OPTIMIZER_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "duonav/agent/navigator.hpp"

namespace duonav::train {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm ceiling over the stepped parameters; 0 disables clipping.
  double clip_norm = 5.0;
};

/// Bias-corrected Adam with one step counter per parameter, so parameters
/// left out of a step keep their own moment schedule.
class Adam {
 public:
  Adam(agent::ParamStore& store, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  /// Updates every parameter whose group is listed; others are untouched.
  /// Returns the pre-clipping global gradient norm over the stepped parameters.
  double step(std::span<const int> groups);
  /// Updates all parameters.
  double step();

  std::int64_t steps_taken(std::size_t param) const { return state_.at(param).t; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  struct State {
    diffcore::Matrix<Real> m;
    diffcore::Matrix<Real> v;
    std::int64_t t = 0;
  };
  double update(const std::vector<std::size_t>& selected);

  agent::ParamStore& store_;
  AdamConfig config_;
  std::vector<State> state_;
};

}  // namespace duonav::train

#endif  // DUONAV_TRAIN_OPTIMIZER_HPP
