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

#ifndef DUONAV_DIFFCORE_GRADCHECK_HPP
#define DUONAV_DIFFCORE_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "duonav/diffcore/tensor.hpp"

namespace duonav::diffcore {

struct GradcheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// 2 for the central difference, 4 for the five-point stencil.
  int order = 2;
  /// Check at most this many coordinates per parameter (0 = all of them),
  /// chosen uniformly at random with `seed`.
  Index max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0;
  double max_abs_error = 0;
  Index checked = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel_error = 0;
  double tolerance = 0;
  bool passed = false;
  std::string worst;
};

/// Relative error used by gradcheck: |a - b| / (|a| + |b| + 1e-8).
inline double gradcheck_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
}

/// Compares reverse-mode gradients of a scalar function with central finite
/// differences. `loss` must rebuild the computation on the tape it is given,
/// binding the parameters through Tape::parameter().
template <typename Scalar>
GradcheckReport gradcheck(const std::function<Tensor<Scalar>(Tape<Scalar>&)>& loss,
                          const std::vector<Parameter<Scalar>*>& params, const GradcheckOptions& opts = {}) {
  if (opts.order != 2 && opts.order != 4) throw std::invalid_argument("gradcheck order must be 2 or 4");
  if (!(opts.step > 0)) throw std::invalid_argument("gradcheck step must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape(true);
    Tensor<Scalar> out = loss(tape);
    tape.backward(out);
  }
  auto evaluate = [&]() {
    Tape<Scalar> tape(false);
    return static_cast<double>(loss(tape).item());
  };

  GradcheckReport report;
  report.tolerance = opts.tolerance;
  std::mt19937_64 rng(opts.seed);
  for (auto* p : params) {
    GradcheckEntry entry;
    entry.name = p->name;
    std::vector<Index> coords(static_cast<std::size_t>(p->size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (opts.max_entries_per_param > 0 && p->size() > opts.max_entries_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(opts.max_entries_per_param));
    }
    for (Index c : coords) {
      Scalar& w = p->value.data()[c];
      const Scalar saved = w;
      auto at = [&](double k) {
        w = saved + static_cast<Scalar>(k * opts.step);
        return evaluate();
      };
      double numeric = 0;
      if (opts.order == 4) {
        numeric = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * opts.step);
      } else {
        numeric = (at(1) - at(-1)) / (2.0 * opts.step);
      }
      w = saved;
      double analytic = static_cast<double>(p->grad.data()[c]);
      entry.max_rel_error = std::max(entry.max_rel_error, gradcheck_relative_error(analytic, numeric));
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic - numeric));
      ++entry.checked;
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst = entry.name;
    }
    report.entries.push_back(entry);
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> all_parameters(ParameterStore<Scalar>& store) {
  std::vector<Parameter<Scalar>*> out;
  store.for_each([&](Parameter<Scalar>& p) { out.push_back(&p); });
  return out;
}

}  // namespace duonav::diffcore

#endif  // DUONAV_DIFFCORE_GRADCHECK_HPP
