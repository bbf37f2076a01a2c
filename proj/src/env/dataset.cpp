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

#include "duonav/env/dataset.hpp"

#include <algorithm>
#include <fstream>

namespace duonav::env {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::ValSeen: return "val_seen";
    case Split::ValUnseen: return "val_unseen";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val_seen") return Split::ValSeen;
  if (name == "val_unseen") return Split::ValUnseen;
  throw std::invalid_argument("unknown split '" + name + "' (train, val_seen, val_unseen)");
}

void DatasetConfig::validate() const {
  world.validate();
  if (train_graphs < 1) throw std::invalid_argument("train_graphs must be >= 1");
  if (unseen_graphs < 0) throw std::invalid_argument("unseen_graphs must be >= 0");
  if (min_route_steps < 1 || max_route_steps < min_route_steps)
    throw std::invalid_argument("route step range must satisfy 1 <= min <= max");
  if (references < 1) throw std::invalid_argument("references must be >= 1");
  if (train_routes < 0 || val_seen_routes < 0 || val_unseen_routes < 0)
    throw std::invalid_argument("route counts must be >= 0");
}

int DatasetConfig::routes(Split s) const {
  switch (s) {
    case Split::Train: return train_routes;
    case Split::ValSeen: return val_seen_routes;
    case Split::ValUnseen: return val_unseen_routes;
  }
  return 0;
}

World::World(DatasetConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.validate();
  const int total = config_.train_graphs + config_.unseen_graphs;
  for (int id = 0; id < total; ++id)
    graphs_.push_back(gen_world(id, mix_seed(seed, static_cast<std::uint64_t>(id)), config_.world));
  vocab_ = make_vocabulary(config_.world.landmark_count);
}

const NavGraph& World::graph(int id) const {
  if (id < 0 || id >= graph_count()) throw DataError("graph id " + std::to_string(id) + " not in world");
  return graphs_[static_cast<std::size_t>(id)];
}

std::vector<int> World::graph_ids(Split s) const {
  std::vector<int> ids;
  if (s == Split::ValUnseen)
    for (int i = config_.train_graphs; i < graph_count(); ++i) ids.push_back(i);
  else
    for (int i = 0; i < config_.train_graphs; ++i) ids.push_back(i);
  return ids;
}

nlohmann::json World::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = seed_;
  j["train_graphs"] = config_.train_graphs;
  j["unseen_graphs"] = config_.unseen_graphs;
  j["min_route_steps"] = config_.min_route_steps;
  j["max_route_steps"] = config_.max_route_steps;
  j["references"] = config_.references;
  j["vocabulary"] = vocab_.tokens();
  auto& gs = j["graphs"] = nlohmann::json::array();
  for (const auto& g : graphs_) gs.push_back(g.to_json());
  return j;
}

World World::from_json(const nlohmann::json& j) {
  try {
    World w;
    w.seed_ = j.at("seed").get<std::uint64_t>();
    w.config_.train_graphs = j.at("train_graphs").get<int>();
    w.config_.unseen_graphs = j.at("unseen_graphs").get<int>();
    w.config_.min_route_steps = j.at("min_route_steps").get<int>();
    w.config_.max_route_steps = j.at("max_route_steps").get<int>();
    w.config_.references = j.at("references").get<int>();
    for (const auto& g : j.at("graphs")) w.graphs_.push_back(NavGraph::from_json(g));
    if (w.graph_count() != w.config_.train_graphs + w.config_.unseen_graphs)
      throw DataError("world graph count disagrees with its split sizes");
    for (int i = 0; i < w.graph_count(); ++i)
      if (w.graphs_[static_cast<std::size_t>(i)].id() != i) throw DataError("world graphs out of order");
    if (!w.graphs_.empty()) w.config_.world = w.graphs_.front().config();
    auto tokens = j.at("vocabulary").get<std::vector<std::string>>();
    if (tokens.size() < agent::Vocabulary::kSpecials) throw DataError("vocabulary lacks special tokens");
    w.vocab_ = agent::Vocabulary(std::vector<std::string>(tokens.begin() + agent::Vocabulary::kSpecials, tokens.end()));
    if (w.vocab_.tokens() != tokens) throw DataError("vocabulary has duplicate or misplaced tokens");
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed world json: ") + e.what());
  }
}

void World::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

World World::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read world file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json PairRecord::to_json() const {
  nlohmann::json j;
  j["graph"] = graph;
  j["path"] = path;
  j["actions"] = actions;
  j["instruction"] = instruction.tokens;
  j["text"] = text;
  j["template"] = template_id;
  j["seed"] = seed;
  j["route_id"] = route_id;
  return j;
}

PairRecord PairRecord::from_json(const nlohmann::json& j) {
  try {
    PairRecord r;
    r.graph = j.at("graph").get<int>();
    r.path = j.at("path").get<std::vector<int>>();
    r.actions = j.at("actions").get<std::vector<int>>();
    r.instruction.tokens = j.at("instruction").get<std::vector<int>>();
    r.text = j.at("text").get<std::string>();
    r.template_id = j.at("template").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.route_id = j.value("route_id", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pair record: ") + e.what());
  }
}

namespace {

bool extend(const NavGraph& g, std::vector<int>& path, std::vector<char>& used, int remaining, std::mt19937_64& rng,
            int& budget) {
  if (remaining == 0) return true;
  if (--budget < 0) return false;
  auto next = g.neighbors(path.back());
  std::shuffle(next.begin(), next.end(), rng);
  for (int m : next) {
    if (used[static_cast<std::size_t>(m)]) continue;
    used[static_cast<std::size_t>(m)] = 1;
    path.push_back(m);
    if (extend(g, path, used, remaining - 1, rng, budget)) return true;
    path.pop_back();
    used[static_cast<std::size_t>(m)] = 0;
  }
  return false;
}

}  // namespace

std::vector<int> sample_route(const NavGraph& graph, int min_steps, int max_steps, std::mt19937_64& rng, int* shrunk) {
  if (min_steps < 1 || max_steps < min_steps) throw std::invalid_argument("bad route step range");
  std::uniform_int_distribution<int> steps_dist(min_steps, max_steps);
  int steps = std::min(steps_dist(rng), graph.size() - 1);
  std::uniform_int_distribution<int> start_dist(0, graph.size() - 1);
  for (; steps >= 1; --steps) {
    for (int attempt = 0; attempt < 32; ++attempt) {
      std::vector<int> path{start_dist(rng)};
      std::vector<char> used(static_cast<std::size_t>(graph.size()), 0);
      used[static_cast<std::size_t>(path[0])] = 1;
      int budget = 2000;
      if (extend(graph, path, used, steps, rng, budget)) return path;
    }
    if (shrunk) ++*shrunk;
  }
  throw DataError("graph " + std::to_string(graph.id()) + " has no edges to walk");
}

agent::Route build_route(const NavGraph& graph, std::span<const int> path) {
  if (path.empty()) throw DataError("empty node path");
  agent::Route route;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const int view = graph.view_to(path[i], path[i + 1]);
    if (view < 0)
      throw DataError("nodes " + std::to_string(path[i]) + " and " + std::to_string(path[i + 1]) +
                      " are not adjacent in graph " + std::to_string(graph.id()));
    route.steps.push_back({graph.panorama(path[i]), view});
  }
  route.terminal = graph.panorama(path.back());
  return route;
}

std::vector<PairRecord> make_split(const World& world, Split split, int routes, std::uint64_t seed) {
  const auto ids = world.graph_ids(split);
  if (ids.empty()) throw DataError(std::string("split ") + split_name(split) + " has no graphs");
  const auto& cfg = world.config();
  const std::uint64_t split_seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(split));
  std::vector<PairRecord> out;
  out.reserve(static_cast<std::size_t>(routes * cfg.references));
  for (int r = 0; r < routes; ++r) {
    const std::uint64_t route_seed = mix_seed(split_seed, static_cast<std::uint64_t>(r));
    std::mt19937_64 rng(route_seed);
    const int graph_id = ids[static_cast<std::size_t>(rng() % ids.size())];
    const NavGraph& g = world.graph(graph_id);
    const auto path = sample_route(g, cfg.min_route_steps, cfg.max_route_steps, rng);
    std::vector<int> actions;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) actions.push_back(g.view_to(path[i], path[i + 1]));
    for (int k = 0; k < cfg.references; ++k) {
      PairRecord rec;
      rec.graph = graph_id;
      rec.path = path;
      rec.actions = actions;
      rec.seed = mix_seed(route_seed, 77 + static_cast<std::uint64_t>(k));
      rec.template_id = static_cast<int>(rec.seed % static_cast<std::uint64_t>(template_count()));
      rec.text = synthesize_text(g, path, rec.template_id, rec.seed);
      rec.instruction = synthesize_instruction(g, path, rec.template_id, rec.seed, world.vocabulary());
      rec.route_id = r;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void validate_record(const World& world, const PairRecord& rec) {
  const NavGraph& g = world.graph(rec.graph);
  if (rec.path.size() < 2) throw DataError("record path has no steps");
  if (rec.actions.size() + 1 != rec.path.size()) throw DataError("record actions do not match its path");
  for (std::size_t i = 0; i < rec.actions.size(); ++i)
    if (g.neighbor(rec.path[i], rec.actions[i]) != rec.path[i + 1])
      throw DataError("record action " + std::to_string(i) + " does not follow its path");
  try {
    rec.instruction.validate(world.vocabulary().size());
  } catch (const std::exception& e) {
    throw DataError(std::string("record instruction: ") + e.what());
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<PairRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << r.to_json().dump() << '\n';
}

std::vector<PairRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<PairRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(PairRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sample> resolve(const World& world, const std::vector<PairRecord>& records) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    validate_record(world, r);
    out.push_back({&r, build_route(world.graph(r.graph), r.path)});
  }
  return out;
}

}  // namespace duonav::env
