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

#ifndef DUONAV_ENV_NAV_GRAPH_HPP
#define DUONAV_ENV_NAV_GRAPH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duonav/agent/navigator.hpp"

namespace duonav::env {

/// Thrown for malformed world or record files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorldConfig {
  int nodes = 30;
  int views = 8;
  int visual_dim = 32;
  /// Landmarks drawn from the head of the lexicon.
  int landmark_count = 32;
  double min_distance = 1.0;
  /// Probability of keeping each short non-tree edge.
  double extra_edge_prob = 0.5;
  double landmark_scale = 1.0;
  double bucket_scale = 0.5;
  double noise_scale = 0.1;

  void validate() const;
};

/// Full landmark lexicon; a world uses the first `landmark_count` entries.
const std::vector<std::string>& landmark_lexicon();

struct Point {
  double x = 0;
  double y = 0;
};

/// 2-D geometric graph. Each edge occupies one view bucket at each endpoint,
/// so a node's panorama has at most K navigable views.
class NavGraph : public agent::PanoramaSource {
 public:
  NavGraph() = default;

  int id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  const WorldConfig& config() const { return config_; }
  int size() const { return static_cast<int>(positions_.size()); }
  int views() const { return config_.views; }
  const Point& position(int node) const;
  int landmark(int node) const;
  const std::string& landmark_name(int node) const;

  /// Neighbour reached through `view` at `node`, or -1.
  int neighbor(int node, int view) const;
  std::vector<int> neighbors(int node) const;
  int degree(int node) const;
  /// View index at `from` whose edge leads to `to`; -1 if not adjacent.
  int view_to(int from, int to) const;
  int edge_count() const;

  double distance(int a, int b) const;
  /// Heading of the segment a -> b in radians, in (-pi, pi].
  double bearing(int a, int b) const;
  /// Heading of view bucket `view` (bucket centre).
  double view_heading(int view) const;

  agent::Panorama panorama(int node) const override;
  int step(int node, int view) const override;

  bool connected() const;
  /// Hop distances from `source` (BFS).
  std::vector<int> hop_distances(int source) const;
  /// Shortest path lengths in distance units from `source` (Dijkstra).
  std::vector<double> path_distances(int source) const;
  int hops(int a, int b) const;
  double shortest_length(int a, int b) const;

  nlohmann::json to_json() const;
  static NavGraph from_json(const nlohmann::json& j);

  friend NavGraph gen_world(int graph_id, std::uint64_t seed, const WorldConfig& config);

 private:
  void check_node(int node) const;

  int id_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t feature_seed_ = 0;
  WorldConfig config_;
  std::vector<Point> positions_;
  std::vector<int> landmarks_;
  /// adjacency_[node * K + view] = neighbour or -1.
  std::vector<int> adjacency_;
};

/// Deterministic graph for (graph_id, seed). Regenerates internally until the
/// bucket-constrained spanning construction yields a connected graph.
NavGraph gen_world(int graph_id, std::uint64_t seed, const WorldConfig& config);

/// Feature vector of a landmark (or of a wall when `landmark` < 0).
std::vector<double> landmark_vector(int landmark, int visual_dim);

/// SplitMix64 step, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace duonav::env

#endif  // DUONAV_ENV_NAV_GRAPH_HPP
