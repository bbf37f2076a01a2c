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

#ifndef DUONAV_TESTS_SUPPORT_HPP
#define DUONAV_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "duonav/diffcore/ops.hpp"

namespace duonav::testing {

using Mat = diffcore::Matrix<double>;
using DTape = diffcore::Tape<double>;
using DTensor = diffcore::Tensor<double>;

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Builds a tensor from leaf variables; the harness reduces it to a scalar
/// with a fixed random projection.
using OpFn = std::function<DTensor(DTape&, const std::vector<DTensor>&)>;

struct FdResult {
  double max_rel_error = 0;
  int checked = 0;
};

/// Reverse-mode gradients of sum(W .* f(inputs)) against central differences
/// with step h, coordinate by coordinate.
inline FdResult compare_with_finite_differences(const OpFn& f, std::vector<Mat> inputs, std::mt19937_64& rng,
                                                double h = 1e-6) {
  Mat weight;
  auto scalar = [&](DTape& tape, std::vector<DTensor>& leaves) {
    DTensor out = f(tape, leaves);
    if (weight.size() == 0) weight = random_matrix(out.rows(), out.cols(), rng);
    return diffcore::sum(diffcore::hadamard(out, tape.constant(weight)));
  };
  std::vector<Mat> grads;
  {
    DTape tape(true);
    std::vector<DTensor> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.variable(m));
    tape.backward(scalar(tape, leaves));
    for (const auto& l : leaves) grads.push_back(l.grad().size() ? l.grad() : Mat::Zero(l.rows(), l.cols()));
  }
  auto evaluate = [&]() {
    DTape tape(false);
    std::vector<DTensor> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.constant(m));
    return scalar(tape, leaves).item();
  };
  FdResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index c = 0; c < inputs[i].size(); ++c) {
      double& w = inputs[i].data()[c];
      const double saved = w;
      w = saved + h;
      const double up = evaluate();
      w = saved - h;
      const double down = evaluate();
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[i].data()[c];
      const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
      r.max_rel_error = std::max(r.max_rel_error, rel);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace duonav::testing

#endif  // DUONAV_TESTS_SUPPORT_HPP
