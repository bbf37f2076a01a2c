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

#include "duonav/eval/path_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace duonav::eval {

void Episode::validate() const {
  if (!graph) throw std::invalid_argument("episode has no graph");
  if (predicted.empty() || reference.empty()) throw std::invalid_argument("episode paths must be nonempty");
}

double path_length(const env::NavGraph& graph, std::span<const int> path) {
  double total = 0;
  for (std::size_t i = 1; i < path.size(); ++i) total += graph.distance(path[i - 1], path[i]);
  return total;
}

double trajectory_length(const Episode& ep) {
  ep.validate();
  return path_length(*ep.graph, ep.predicted);
}

bool success(const Episode& ep, const Thresholds& th) {
  ep.validate();
  const int h = ep.graph->hops(ep.predicted.back(), ep.goal());
  return h >= 0 && h <= th.success_hops;
}

bool oracle_success(const Episode& ep, const Thresholds& th) {
  ep.validate();
  const auto d = ep.graph->hop_distances(ep.goal());
  return std::any_of(ep.predicted.begin(), ep.predicted.end(), [&](int n) {
    const int h = d[static_cast<std::size_t>(n)];
    return h >= 0 && h <= th.success_hops;
  });
}

double spl(const Episode& ep, const Thresholds& th) {
  if (!success(ep, th)) return 0.0;
  const double shortest = ep.graph->shortest_length(ep.predicted.front(), ep.goal());
  const double taken = trajectory_length(ep);
  const double denom = std::max(taken, shortest);
  return denom > 0 ? shortest / denom : 1.0;
}

double dtw(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref) {
  if (pred.empty() || ref.empty()) throw std::invalid_argument("dtw needs nonempty paths");
  const std::size_t n = pred.size(), m = ref.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = graph.distance(pred[i - 1], ref[j - 1]);
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double ndtw(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref,
            double distance_threshold) {
  if (!(distance_threshold > 0)) throw std::invalid_argument("distance threshold must be positive");
  return std::exp(-dtw(graph, pred, ref) / (static_cast<double>(ref.size()) * distance_threshold));
}

double sdtw(const Episode& ep, const Thresholds& th) {
  return success(ep, th) ? ndtw(*ep.graph, ep.predicted, ep.reference, th.distance) : 0.0;
}

double cls(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref, double distance_threshold) {
  if (pred.empty() || ref.empty()) throw std::invalid_argument("cls needs nonempty paths");
  if (!(distance_threshold > 0)) throw std::invalid_argument("distance threshold must be positive");
  double coverage = 0;
  for (int r : ref) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int p : pred) nearest = std::min(nearest, graph.distance(r, p));
    coverage += std::exp(-nearest / distance_threshold);
  }
  coverage /= static_cast<double>(ref.size());
  const double expected = coverage * path_length(graph, ref);
  const double denom = expected + std::abs(expected - path_length(graph, pred));
  const double length_score = denom > 0 ? expected / denom : 1.0;
  return coverage * length_score;
}

double success_rate(std::span<const Episode> eps, const Thresholds& th) {
  if (eps.empty()) return 0.0;
  double s = 0;
  for (const auto& e : eps) s += success(e, th) ? 1.0 : 0.0;
  return s / static_cast<double>(eps.size());
}

double oracle_rate(std::span<const Episode> eps, const Thresholds& th) {
  if (eps.empty()) return 0.0;
  double s = 0;
  for (const auto& e : eps) s += oracle_success(e, th) ? 1.0 : 0.0;
  return s / static_cast<double>(eps.size());
}

double mean_spl(std::span<const Episode> eps, const Thresholds& th) {
  if (eps.empty()) return 0.0;
  double s = 0;
  for (const auto& e : eps) s += spl(e, th);
  return s / static_cast<double>(eps.size());
}

}  // namespace duonav::eval
