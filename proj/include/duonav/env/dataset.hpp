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

#ifndef DUONAV_ENV_DATASET_HPP
#define DUONAV_ENV_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "duonav/env/instructions.hpp"
#include "duonav/env/nav_graph.hpp"

namespace duonav::env {

enum class Split { Train, ValSeen, ValUnseen };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct DatasetConfig {
  WorldConfig world;
  int train_graphs = 20;
  int unseen_graphs = 5;
  int min_route_steps = 3;
  int max_route_steps = 6;
  /// Instructions per route (3 mirrors multi-reference evaluation sets).
  int references = 1;
  /// Route counts per split.
  int train_routes = 5000;
  int val_seen_routes = 500;
  int val_unseen_routes = 500;

  void validate() const;
  int routes(Split s) const;
};

/// All graphs of a run plus the shared vocabulary. Graph ids [0, train_graphs)
/// serve train and val_seen; the following unseen_graphs ids serve val_unseen.
class World {
 public:
  World() = default;
  World(DatasetConfig config, std::uint64_t seed);

  const DatasetConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const agent::Vocabulary& vocabulary() const { return vocab_; }
  const NavGraph& graph(int id) const;
  int graph_count() const { return static_cast<int>(graphs_.size()); }
  std::vector<int> graph_ids(Split s) const;

  nlohmann::json to_json() const;
  static World from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static World load(const std::filesystem::path& path);

 private:
  DatasetConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<NavGraph> graphs_;
  agent::Vocabulary vocab_;
};

struct PairRecord {
  int graph = 0;
  std::vector<int> path;
  std::vector<int> actions;
  agent::Instruction instruction;
  std::string text;
  int template_id = 0;
  std::uint64_t seed = 0;
  /// Records sharing a route_id describe the same route.
  int route_id = 0;

  nlohmann::json to_json() const;
  static PairRecord from_json(const nlohmann::json& j);
};

/// Simple path with a step count drawn from [min_steps, max_steps]. When no
/// simple path of that length exists the length shrinks and `shrunk` is
/// incremented.
std::vector<int> sample_route(const NavGraph& graph, int min_steps, int max_steps, std::mt19937_64& rng,
                              int* shrunk = nullptr);

/// Route (panoramas + actions) along a node path, with the terminal panorama.
agent::Route build_route(const NavGraph& graph, std::span<const int> path);

/// `routes` x `references` records for one split; deterministic in (world, split, seed).
std::vector<PairRecord> make_split(const World& world, Split split, int routes, std::uint64_t seed);

/// Throws DataError if the record disagrees with its graph or vocabulary.
void validate_record(const World& world, const PairRecord& rec);

void write_jsonl(const std::filesystem::path& path, const std::vector<PairRecord>& records);
std::vector<PairRecord> read_jsonl(const std::filesystem::path& path);

/// A record resolved against its world.
struct Sample {
  const PairRecord* record = nullptr;
  agent::Route route;
};

std::vector<Sample> resolve(const World& world, const std::vector<PairRecord>& records);

}  // namespace duonav::env

#endif  // DUONAV_ENV_DATASET_HPP
