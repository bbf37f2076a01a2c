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

#include "duonav/train/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace duonav::train {

Adam::Adam(agent::ParamStore& store, AdamConfig config) : store_(store), config_(config) {
  if (!(config_.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (config_.clip_norm < 0) throw std::invalid_argument("clip_norm must be >= 0");
  state_.resize(store_.size());
  for (std::size_t i = 0; i < store_.size(); ++i) {
    state_[i].m = diffcore::Matrix<Real>::Zero(store_[i].value.rows(), store_[i].value.cols());
    state_[i].v = state_[i].m;
  }
}

double Adam::step(std::span<const int> groups) {
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < store_.size(); ++i)
    if (std::find(groups.begin(), groups.end(), store_[i].group) != groups.end()) selected.push_back(i);
  return update(selected);
}

double Adam::step() {
  std::vector<std::size_t> selected(store_.size());
  for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  return update(selected);
}

double Adam::update(const std::vector<std::size_t>& selected) {
  double sq = 0;
  for (std::size_t i : selected) {
    const auto& g = store_[i].grad;
    if (g.size()) sq += static_cast<double>(g.squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw diffcore::NumericError("non-finite gradient norm");
  const double scale = config_.clip_norm > 0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  const Real b1 = static_cast<Real>(config_.beta1), b2 = static_cast<Real>(config_.beta2);
  for (std::size_t i : selected) {
    auto& p = store_[i];
    auto& s = state_[i];
    if (p.grad.size() == 0) p.zero_grad();
    const diffcore::Matrix<Real> g = p.grad * static_cast<Real>(scale);
    ++s.t;
    s.m = b1 * s.m + (1 - b1) * g;
    s.v = b2 * s.v + (1 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(s.t));
    const Real step_size = static_cast<Real>(config_.lr / c1);
    const Real root_c2 = static_cast<Real>(std::sqrt(c2));
    const Real eps = static_cast<Real>(config_.eps);
    p.value.array() -= step_size * s.m.array() / (s.v.array().sqrt() / root_c2 + eps);
  }
  return norm;
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated optimizer state");
  return v;
}

}  // namespace

void Adam::save(std::ostream& out) const {
  put<std::uint64_t>(out, state_.size());
  for (const auto& s : state_) {
    put<std::int64_t>(out, s.t);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(s.m.size()));
    for (Eigen::Index i = 0; i < s.m.size(); ++i) put<double>(out, static_cast<double>(s.m.data()[i]));
    for (Eigen::Index i = 0; i < s.v.size(); ++i) put<double>(out, static_cast<double>(s.v.data()[i]));
  }
}

void Adam::load(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n != state_.size()) throw std::runtime_error("optimizer state has a different parameter count");
  for (auto& s : state_) {
    s.t = get<std::int64_t>(in);
    const auto size = get<std::uint64_t>(in);
    if (size != static_cast<std::uint64_t>(s.m.size())) throw std::runtime_error("optimizer state shape mismatch");
    for (Eigen::Index i = 0; i < s.m.size(); ++i) s.m.data()[i] = static_cast<Real>(get<double>(in));
    for (Eigen::Index i = 0; i < s.v.size(); ++i) s.v.data()[i] = static_cast<Real>(get<double>(in));
  }
}

}  // namespace duonav::train
