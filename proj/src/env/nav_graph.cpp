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

#include "duonav/env/nav_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>

namespace duonav::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> gaussian_vector(std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = nd(rng);
  return v;
}

int bucket_of(double heading, int views) {
  const long b = std::lround(heading / (kTwoPi / views));
  return static_cast<int>(((b % views) + views) % views);
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(a)] = b;
    return true;
  }
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void WorldConfig::validate() const {
  if (nodes < 2) throw std::invalid_argument("a world needs at least 2 nodes");
  if (views < 2) throw std::invalid_argument("a world needs at least 2 views");
  if (visual_dim < 1) throw std::invalid_argument("visual_dim must be >= 1");
  const int lex = static_cast<int>(landmark_lexicon().size());
  if (landmark_count < 1 || landmark_count > lex)
    throw std::invalid_argument("landmark_count must be in [1, " + std::to_string(lex) + "]");
  if (!(min_distance > 0)) throw std::invalid_argument("min_distance must be positive");
  if (extra_edge_prob < 0 || extra_edge_prob > 1) throw std::invalid_argument("extra_edge_prob must be in [0, 1]");
}

const std::vector<std::string>& landmark_lexicon() {
  static const std::vector<std::string> words = {
      "kitchen",  "sofa",     "stairs",    "bedroom",  "bathroom", "table",     "lamp",     "door",
      "window",   "fireplace", "piano",    "painting", "plant",    "bookshelf", "hallway",  "closet",
      "desk",     "bed",      "mirror",    "rug",      "chair",    "sink",      "fridge",   "oven",
      "tv",       "counter",  "bench",     "statue",   "fountain", "balcony",   "garage",   "laundry",
      "pantry",   "study",    "cabinet",   "dresser",  "bathtub",  "shower",    "armchair", "clock",
      "vase",     "archway",  "elevator",  "patio",    "pool",     "garden",    "library",  "office",
      "lobby",    "corridor", "attic",     "basement", "porch",    "terrace",   "wardrobe", "couch",
      "sculpture", "aquarium", "billiards", "bar",     "gym",      "nursery",   "foyer",    "den"};
  return words;
}

std::vector<double> landmark_vector(int landmark, int visual_dim) {
  return gaussian_vector(mix_seed(0x6c616e646d61726bULL, static_cast<std::uint64_t>(landmark + 1)), visual_dim);
}

const Point& NavGraph::position(int node) const {
  check_node(node);
  return positions_[static_cast<std::size_t>(node)];
}

int NavGraph::landmark(int node) const {
  check_node(node);
  return landmarks_[static_cast<std::size_t>(node)];
}

const std::string& NavGraph::landmark_name(int node) const {
  return landmark_lexicon()[static_cast<std::size_t>(landmark(node))];
}

void NavGraph::check_node(int node) const {
  if (node < 0 || node >= size())
    throw std::out_of_range("node " + std::to_string(node) + " not in graph " + std::to_string(id_));
}

int NavGraph::neighbor(int node, int view) const {
  check_node(node);
  if (view < 0 || view >= views()) return -1;
  return adjacency_[static_cast<std::size_t>(node * views() + view)];
}

std::vector<int> NavGraph::neighbors(int node) const {
  std::vector<int> out;
  for (int k = 0; k < views(); ++k)
    if (int m = neighbor(node, k); m >= 0) out.push_back(m);
  return out;
}

int NavGraph::degree(int node) const { return static_cast<int>(neighbors(node).size()); }

int NavGraph::view_to(int from, int to) const {
  for (int k = 0; k < views(); ++k)
    if (neighbor(from, k) == to) return k;
  return -1;
}

int NavGraph::edge_count() const {
  int n = 0;
  for (int v : adjacency_) n += v >= 0 ? 1 : 0;
  return n / 2;
}

double NavGraph::distance(int a, int b) const {
  const Point& p = position(a);
  const Point& q = position(b);
  return std::hypot(q.x - p.x, q.y - p.y);
}

double NavGraph::bearing(int a, int b) const {
  const Point& p = position(a);
  const Point& q = position(b);
  return std::atan2(q.y - p.y, q.x - p.x);
}

double NavGraph::view_heading(int view) const {
  double h = view * kTwoPi / views();
  if (h > std::numbers::pi) h -= kTwoPi;
  return h;
}

agent::Panorama NavGraph::panorama(int node) const {
  check_node(node);
  agent::Panorama pano;
  pano.views.resize(static_cast<std::size_t>(views()));
  pano.navigable.resize(static_cast<std::size_t>(views()));
  for (int k = 0; k < views(); ++k) {
    const int m = neighbor(node, k);
    auto& view = pano.views[static_cast<std::size_t>(k)];
    const double heading = m >= 0 ? bearing(node, m) : view_heading(k);
    view.orientation = agent::ViewObservation::orientation_from(heading, 0.0);
    const auto lm = landmark_vector(m >= 0 ? landmark(m) : -1, config_.visual_dim);
    const auto bucket =
        gaussian_vector(mix_seed(0x6275636b6574ULL, static_cast<std::uint64_t>(k)), config_.visual_dim);
    const auto noise = gaussian_vector(
        mix_seed(feature_seed_, static_cast<std::uint64_t>(node) * static_cast<std::uint64_t>(views()) +
                                    static_cast<std::uint64_t>(k)),
        config_.visual_dim);
    view.visual.resize(static_cast<std::size_t>(config_.visual_dim));
    for (std::size_t j = 0; j < view.visual.size(); ++j)
      view.visual[j] = config_.landmark_scale * lm[j] + config_.bucket_scale * bucket[j] + config_.noise_scale * noise[j];
    pano.navigable[static_cast<std::size_t>(k)] = m >= 0;
  }
  return pano;
}

int NavGraph::step(int node, int view) const {
  const int m = neighbor(node, view);
  if (m < 0)
    throw agent::ActionError("view " + std::to_string(view) + " is not navigable at node " + std::to_string(node));
  return m;
}

std::vector<int> NavGraph::hop_distances(int source) const {
  check_node(source);
  std::vector<int> dist(static_cast<std::size_t>(size()), -1);
  std::queue<int> q;
  dist[static_cast<std::size_t>(source)] = 0;
  q.push(source);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] >= 0) continue;
      dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
      q.push(v);
    }
  }
  return dist;
}

std::vector<double> NavGraph::path_distances(int source) const {
  check_node(source);
  std::vector<double> dist(static_cast<std::size_t>(size()), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(source)] = 0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (int v : neighbors(u)) {
      const double nd = d + distance(u, v);
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

bool NavGraph::connected() const {
  if (size() == 0) return true;
  const auto d = hop_distances(0);
  return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

int NavGraph::hops(int a, int b) const {
  check_node(b);
  return hop_distances(a)[static_cast<std::size_t>(b)];
}

double NavGraph::shortest_length(int a, int b) const {
  check_node(b);
  return path_distances(a)[static_cast<std::size_t>(b)];
}

NavGraph gen_world(int graph_id, std::uint64_t seed, const WorldConfig& config) {
  config.validate();
  const int n = config.nodes;
  const int k = config.views;
  const double side = std::sqrt(static_cast<double>(n)) * 1.6 * config.min_distance;

  for (std::uint64_t attempt = 0;; ++attempt) {
    NavGraph g;
    g.id_ = graph_id;
    g.seed_ = seed;
    g.config_ = config;
    std::mt19937_64 rng(mix_seed(seed, attempt));
    g.feature_seed_ = rng();
    std::uniform_real_distribution<double> coord(0.0, side);
    std::uniform_int_distribution<int> pick_landmark(0, config.landmark_count - 1);

    for (int i = 0; i < n; ++i) {
      Point p;
      for (int tries = 0; tries < 1000; ++tries) {
        p = {coord(rng), coord(rng)};
        const bool clear = std::all_of(g.positions_.begin(), g.positions_.end(), [&](const Point& q) {
          return std::hypot(p.x - q.x, p.y - q.y) >= config.min_distance;
        });
        if (clear) break;
      }
      g.positions_.push_back(p);
      g.landmarks_.push_back(pick_landmark(rng));
    }
    g.adjacency_.assign(static_cast<std::size_t>(n * k), -1);

    struct Pair {
      double length;
      int a, b;
    };
    std::vector<Pair> pairs;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) pairs.push_back({g.distance(a, b), a, b});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.length < y.length; });

    auto try_link = [&](int a, int b) {
      const int va = bucket_of(g.bearing(a, b), k);
      const int vb = bucket_of(g.bearing(b, a), k);
      auto& sa = g.adjacency_[static_cast<std::size_t>(a * k + va)];
      auto& sb = g.adjacency_[static_cast<std::size_t>(b * k + vb)];
      if (sa >= 0 || sb >= 0) return false;
      sa = b;
      sb = a;
      return true;
    };

    UnionFind uf(n);
    std::vector<double> tree_lengths;
    for (const Pair& p : pairs) {
      if (uf.find(p.a) == uf.find(p.b)) continue;
      if (try_link(p.a, p.b)) {
        uf.unite(p.a, p.b);
        tree_lengths.push_back(p.length);
      }
    }
    if (!tree_lengths.empty()) {
      std::vector<double> sorted = tree_lengths;
      std::sort(sorted.begin(), sorted.end());
      const double cutoff = 1.5 * sorted[sorted.size() / 2];
      std::bernoulli_distribution keep(config.extra_edge_prob);
      for (const Pair& p : pairs) {
        if (p.length > cutoff) break;
        if (g.view_to(p.a, p.b) >= 0) continue;
        if (keep(rng)) try_link(p.a, p.b);
      }
    }
    if (g.connected()) return g;
  }
}

nlohmann::json NavGraph::to_json() const {
  nlohmann::json j;
  j["id"] = id_;
  j["seed"] = seed_;
  j["feature_seed"] = feature_seed_;
  j["config"] = {{"nodes", config_.nodes},
                 {"views", config_.views},
                 {"visual_dim", config_.visual_dim},
                 {"landmark_count", config_.landmark_count},
                 {"min_distance", config_.min_distance},
                 {"extra_edge_prob", config_.extra_edge_prob},
                 {"landmark_scale", config_.landmark_scale},
                 {"bucket_scale", config_.bucket_scale},
                 {"noise_scale", config_.noise_scale}};
  auto& pos = j["positions"] = nlohmann::json::array();
  for (const auto& p : positions_) pos.push_back({p.x, p.y});
  j["landmarks"] = landmarks_;
  auto& names = j["landmark_names"] = nlohmann::json::array();
  for (int i = 0; i < size(); ++i) names.push_back(landmark_name(i));
  auto& edges = j["edges"] = nlohmann::json::array();
  for (int a = 0; a < size(); ++a)
    for (int v = 0; v < views(); ++v) {
      const int b = neighbor(a, v);
      if (b > a) edges.push_back({a, b, v, view_to(b, a)});
    }
  return j;
}

NavGraph NavGraph::from_json(const nlohmann::json& j) {
  try {
    NavGraph g;
    g.id_ = j.at("id").get<int>();
    g.seed_ = j.at("seed").get<std::uint64_t>();
    g.feature_seed_ = j.at("feature_seed").get<std::uint64_t>();
    const auto& c = j.at("config");
    g.config_.nodes = c.at("nodes").get<int>();
    g.config_.views = c.at("views").get<int>();
    g.config_.visual_dim = c.at("visual_dim").get<int>();
    g.config_.landmark_count = c.at("landmark_count").get<int>();
    g.config_.min_distance = c.at("min_distance").get<double>();
    g.config_.extra_edge_prob = c.at("extra_edge_prob").get<double>();
    g.config_.landmark_scale = c.at("landmark_scale").get<double>();
    g.config_.bucket_scale = c.at("bucket_scale").get<double>();
    g.config_.noise_scale = c.at("noise_scale").get<double>();
    g.config_.validate();
    for (const auto& p : j.at("positions")) g.positions_.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    g.landmarks_ = j.at("landmarks").get<std::vector<int>>();
    const int n = static_cast<int>(g.positions_.size());
    const int k = g.config_.views;
    if (n != g.config_.nodes || static_cast<int>(g.landmarks_.size()) != n)
      throw DataError("graph " + std::to_string(g.id_) + ": node arrays disagree with config");
    for (int lm : g.landmarks_)
      if (lm < 0 || lm >= g.config_.landmark_count) throw DataError("landmark id out of range");
    g.adjacency_.assign(static_cast<std::size_t>(n * k), -1);
    for (const auto& e : j.at("edges")) {
      const int a = e.at(0).get<int>(), b = e.at(1).get<int>(), va = e.at(2).get<int>(), vb = e.at(3).get<int>();
      if (a < 0 || a >= n || b < 0 || b >= n || va < 0 || va >= k || vb < 0 || vb >= k)
        throw DataError("edge out of range in graph " + std::to_string(g.id_));
      g.adjacency_[static_cast<std::size_t>(a * k + va)] = b;
      g.adjacency_[static_cast<std::size_t>(b * k + vb)] = a;
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph json: ") + e.what());
  }
}

}  // namespace duonav::env
