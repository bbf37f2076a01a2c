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

#ifndef DUONAV_EVAL_PATH_METRICS_HPP
#define DUONAV_EVAL_PATH_METRICS_HPP

#include <span>
#include <vector>

#include "duonav/env/nav_graph.hpp"

namespace duonav::eval {

/// Success radius: hops for SR/OR/SPL, distance units for nDTW/CLS.
struct Thresholds {
  int success_hops = 1;
  double distance = 1.0;
};

struct Episode {
  const env::NavGraph* graph = nullptr;
  std::vector<int> predicted;
  std::vector<int> reference;
  bool stopped = true;

  int goal() const { return reference.back(); }
  void validate() const;
};

/// Sum of Euclidean edge lengths along a node path.
double path_length(const env::NavGraph& graph, std::span<const int> path);
double trajectory_length(const Episode& ep);

bool success(const Episode& ep, const Thresholds& th);
bool oracle_success(const Episode& ep, const Thresholds& th);
/// S * l* / max(l, l*) with l* the shortest start-to-goal length.
double spl(const Episode& ep, const Thresholds& th);

/// Standard DTW with Euclidean node-to-node cost.
double dtw(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref);
/// exp(-DTW / (|ref| * distance_threshold)).
double ndtw(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref, double distance_threshold);
double sdtw(const Episode& ep, const Thresholds& th);

/// Path coverage times length score.
double cls(const env::NavGraph& graph, std::span<const int> pred, std::span<const int> ref, double distance_threshold);

double success_rate(std::span<const Episode> eps, const Thresholds& th);
double oracle_rate(std::span<const Episode> eps, const Thresholds& th);
double mean_spl(std::span<const Episode> eps, const Thresholds& th);

}  // namespace duonav::eval

#endif  // DUONAV_EVAL_PATH_METRICS_HPP
