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

#include "duonav/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace duonav::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a valid number");
  return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + ": invalid section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": missing value for '" + key + "'");
    if (std::count(value.begin(), value.end(), '"') % 2 != 0) throw ConfigError(where + ": unterminated string");
    c.values_[section.empty() ? key : section + "." + key] = unquote(value);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid config key '" + key + "'");
  values_[key] = unquote(trim(value));
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<int>(key, it->second);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number<double>(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false");
}

std::string Config::to_text() const {
  std::ostringstream out;
  std::string current;
  bool first = true;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (first || section != current) {
      if (!first) out << '\n';
      if (!section.empty()) out << '[' << section << "]\n";
      current = section;
      first = false;
    }
    const bool bare = !value.empty() && (std::isdigit(static_cast<unsigned char>(value[0])) || value[0] == '-' ||
                                         value == "true" || value == "false");
    out << name << " = " << (bare ? value : "\"" + value + "\"") << '\n';
  }
  return out.str();
}

std::uint64_t subsystem_seed(std::uint64_t root, Subsystem s) {
  return env::mix_seed(root, static_cast<std::uint64_t>(s));
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = {
        "run.seed", "run.data_dir",
        "world.nodes", "world.views", "world.visual_dim", "world.landmark_count", "world.min_distance",
        "world.extra_edge_prob", "world.landmark_scale", "world.bucket_scale", "world.noise_scale",
        "data.train_graphs", "data.unseen_graphs", "data.min_route_steps", "data.max_route_steps",
        "data.references", "data.train_routes", "data.val_seen_routes", "data.val_unseen_routes",
        "model.width", "model.heads", "model.ffn_multiplier", "model.language_encoder_depth",
        "model.route_encoder_depth", "model.language_decoder_depth", "model.route_decoder_depth",
        "model.horizon", "model.max_text_length", "model.min_steps",
        "eval.success_hops", "eval.distance_threshold", "eval.max_steps", "eval.max_words",
        "finetune.regime"};
    for (const char* phase : {"pretrain", "finetune"})
      for (const char* f : {"lr", "batch_size", "iterations", "ratio_ig", "ratio_if", "ratio_itm", "checkpoint_every",
                            "clip_norm"})
        k.insert(std::string(phase) + "." + f);
    return k;
  }();
  return keys;
}

train::TrainConfig read_phase(const Config& c, const std::string& p, train::TrainConfig t) {
  t.lr = c.get_double(p + ".lr", t.lr);
  t.batch_size = c.get_int(p + ".batch_size", t.batch_size);
  t.iterations = c.get_int(p + ".iterations", t.iterations);
  t.ratio.generation = c.get_double(p + ".ratio_ig", t.ratio.generation);
  t.ratio.following = c.get_double(p + ".ratio_if", t.ratio.following);
  t.ratio.matching = c.get_double(p + ".ratio_itm", t.ratio.matching);
  t.checkpoint_every = c.get_int(p + ".checkpoint_every", t.checkpoint_every);
  t.clip_norm = c.get_double(p + ".clip_norm", t.clip_norm);
  return t;
}

void write_phase(Config& c, const std::string& p, const train::TrainConfig& t) {
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  c.set(p + ".lr", num(t.lr));
  c.set(p + ".batch_size", std::to_string(t.batch_size));
  c.set(p + ".iterations", std::to_string(t.iterations));
  c.set(p + ".ratio_ig", num(t.ratio.generation));
  c.set(p + ".ratio_if", num(t.ratio.following));
  c.set(p + ".ratio_itm", num(t.ratio.matching));
  c.set(p + ".checkpoint_every", std::to_string(t.checkpoint_every));
  c.set(p + ".clip_norm", num(t.clip_norm));
}

}  // namespace

RunConfig RunConfig::from_config(const Config& c) {
  for (const auto& [key, value] : c.values())
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig r;
  r.seed = c.get_u64("run.seed", r.seed);
  r.data_dir = c.get_string("run.data_dir", r.data_dir);

  auto& w = r.data.world;
  w.nodes = c.get_int("world.nodes", w.nodes);
  w.views = c.get_int("world.views", w.views);
  w.visual_dim = c.get_int("world.visual_dim", w.visual_dim);
  w.landmark_count = c.get_int("world.landmark_count", w.landmark_count);
  w.min_distance = c.get_double("world.min_distance", w.min_distance);
  w.extra_edge_prob = c.get_double("world.extra_edge_prob", w.extra_edge_prob);
  w.landmark_scale = c.get_double("world.landmark_scale", w.landmark_scale);
  w.bucket_scale = c.get_double("world.bucket_scale", w.bucket_scale);
  w.noise_scale = c.get_double("world.noise_scale", w.noise_scale);

  auto& d = r.data;
  d.train_graphs = c.get_int("data.train_graphs", d.train_graphs);
  d.unseen_graphs = c.get_int("data.unseen_graphs", d.unseen_graphs);
  d.min_route_steps = c.get_int("data.min_route_steps", d.min_route_steps);
  d.max_route_steps = c.get_int("data.max_route_steps", d.max_route_steps);
  d.references = c.get_int("data.references", d.references);
  d.train_routes = c.get_int("data.train_routes", d.train_routes);
  d.val_seen_routes = c.get_int("data.val_seen_routes", d.val_seen_routes);
  d.val_unseen_routes = c.get_int("data.val_unseen_routes", d.val_unseen_routes);

  auto& m = r.model;
  m.attention.width = c.get_int("model.width", m.attention.width);
  m.attention.heads = c.get_int("model.heads", m.attention.heads);
  m.attention.ffn_multiplier = c.get_int("model.ffn_multiplier", m.attention.ffn_multiplier);
  m.attention.language_encoder_depth = c.get_int("model.language_encoder_depth", m.attention.language_encoder_depth);
  m.attention.route_encoder_depth = c.get_int("model.route_encoder_depth", m.attention.route_encoder_depth);
  m.attention.language_decoder_depth = c.get_int("model.language_decoder_depth", m.attention.language_decoder_depth);
  m.attention.route_decoder_depth = c.get_int("model.route_decoder_depth", m.attention.route_decoder_depth);
  m.horizon = c.get_int("model.horizon", m.horizon);
  m.max_text_length = c.get_int("model.max_text_length", m.max_text_length);
  m.min_steps = c.get_int("model.min_steps", m.min_steps);

  r.pretrain = read_phase(c, "pretrain", r.pretrain);
  r.finetune = read_phase(c, "finetune", r.finetune);
  try {
    r.finetune.regime = train::parse_regime(c.get_string("finetune.regime", "mt"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  r.eval.thresholds.success_hops = c.get_int("eval.success_hops", r.eval.thresholds.success_hops);
  r.eval.thresholds.distance = c.get_double("eval.distance_threshold", r.eval.thresholds.distance);
  r.eval.max_steps = c.get_int("eval.max_steps", r.eval.max_steps);
  r.eval.max_words = c.get_int("eval.max_words", r.eval.max_words);
  r.validate();
  return r;
}

agent::ModelConfig RunConfig::model_for(int vocab_size) const {
  agent::ModelConfig m = model;
  m.views = data.world.views;
  m.visual_dim = data.world.visual_dim;
  m.vocab_size = vocab_size;
  return m;
}

void RunConfig::validate() const {
  try {
    data.validate();
    model_for(agent::Vocabulary::kSpecials + 1).validate();
    pretrain.validate();
    finetune.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.max_route_steps >= model.horizon)
    throw ConfigError("model.horizon must exceed data.max_route_steps (the STOP decision needs a step index)");
  if (eval.max_steps < 0 || eval.max_steps >= model.horizon)
    throw ConfigError("eval.max_steps must lie in [0, model.horizon)");
  if (eval.max_words < 0 || eval.max_words + 1 > model.max_text_length)
    throw ConfigError("eval.max_words must fit in model.max_text_length");
  if (eval.thresholds.success_hops < 0 || !(eval.thresholds.distance > 0))
    throw ConfigError("eval thresholds must be non-negative hops and a positive distance");
}

Config RunConfig::to_config() const {
  Config c;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  c.set("run.seed", std::to_string(seed));
  c.set("run.data_dir", data_dir);
  const auto& w = data.world;
  c.set("world.nodes", std::to_string(w.nodes));
  c.set("world.views", std::to_string(w.views));
  c.set("world.visual_dim", std::to_string(w.visual_dim));
  c.set("world.landmark_count", std::to_string(w.landmark_count));
  c.set("world.min_distance", num(w.min_distance));
  c.set("world.extra_edge_prob", num(w.extra_edge_prob));
  c.set("world.landmark_scale", num(w.landmark_scale));
  c.set("world.bucket_scale", num(w.bucket_scale));
  c.set("world.noise_scale", num(w.noise_scale));
  c.set("data.train_graphs", std::to_string(data.train_graphs));
  c.set("data.unseen_graphs", std::to_string(data.unseen_graphs));
  c.set("data.min_route_steps", std::to_string(data.min_route_steps));
  c.set("data.max_route_steps", std::to_string(data.max_route_steps));
  c.set("data.references", std::to_string(data.references));
  c.set("data.train_routes", std::to_string(data.train_routes));
  c.set("data.val_seen_routes", std::to_string(data.val_seen_routes));
  c.set("data.val_unseen_routes", std::to_string(data.val_unseen_routes));
  const auto& a = model.attention;
  c.set("model.width", std::to_string(a.width));
  c.set("model.heads", std::to_string(a.heads));
  c.set("model.ffn_multiplier", std::to_string(a.ffn_multiplier));
  c.set("model.language_encoder_depth", std::to_string(a.language_encoder_depth));
  c.set("model.route_encoder_depth", std::to_string(a.route_encoder_depth));
  c.set("model.language_decoder_depth", std::to_string(a.language_decoder_depth));
  c.set("model.route_decoder_depth", std::to_string(a.route_decoder_depth));
  c.set("model.horizon", std::to_string(model.horizon));
  c.set("model.max_text_length", std::to_string(model.max_text_length));
  c.set("model.min_steps", std::to_string(model.min_steps));
  write_phase(c, "pretrain", pretrain);
  write_phase(c, "finetune", finetune);
  c.set("finetune.regime", train::regime_name(finetune.regime));
  c.set("eval.success_hops", std::to_string(eval.thresholds.success_hops));
  c.set("eval.distance_threshold", num(eval.thresholds.distance));
  c.set("eval.max_steps", std::to_string(eval.max_steps));
  c.set("eval.max_words", std::to_string(eval.max_words));
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  const Config c = to_config();
  for (const auto& [k, v] : c.values()) j[k] = v;
  return j;
}

}  // namespace duonav::io
