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

#ifndef DUONAV_IO_CONFIG_HPP
#define DUONAV_IO_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/eval/evaluate.hpp"
#include "duonav/train/trainer.hpp"

namespace duonav::io {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key -> value` view of a TOML-style file:
///
///   # comment
///   [section]
///   key = value        # numbers, true/false, or "quoted strings"
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// `section.key=value`.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical text form, sections in key order.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

enum class Subsystem : std::uint64_t { World = 1, Data = 2, Model = 3, Pretrain = 4, Finetune = 5, Baseline = 6 };

/// Seed of one subsystem, derived from the run's root seed.
std::uint64_t subsystem_seed(std::uint64_t root, Subsystem s);

/// Everything a run depends on.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string data_dir = "data";
  env::DatasetConfig data;
  agent::ModelConfig model;
  train::TrainConfig pretrain = train::TrainConfig::pretrain_defaults();
  train::TrainConfig finetune = train::TrainConfig::finetune_defaults();
  eval::EvalConfig eval;

  /// Unknown keys and invalid values raise ConfigError.
  static RunConfig from_config(const Config& c);
  Config to_config() const;
  nlohmann::json to_json() const;
  /// Model config for a world with `vocab_size` tokens.
  agent::ModelConfig model_for(int vocab_size) const;
  void validate() const;
};

}  // namespace duonav::io

#endif  // DUONAV_IO_CONFIG_HPP
