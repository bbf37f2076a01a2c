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

#ifndef DUONAV_IO_CHECKPOINT_HPP
#define DUONAV_IO_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duonav/agent/navigator.hpp"

namespace duonav::io {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::uint32_t kCheckpointVersion = 1;

/// One tensor as stored on disk.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

/// Binary layout, little-endian: "LANA", u32 version, then per parameter
/// u32 name length, name bytes, u32 rank, u64 dims[rank], f64 data.
void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

void save_parameters(const std::filesystem::path& path, const agent::ParamStore& store);
/// Names, order and shapes must match the store exactly.
void load_parameters(const std::filesystem::path& path, agent::ParamStore& store);

/// Sidecar paths next to a checkpoint.
std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);
std::filesystem::path optimizer_path(const std::filesystem::path& checkpoint);

nlohmann::json model_config_to_json(const agent::ModelConfig& c);
agent::ModelConfig model_config_from_json(const nlohmann::json& j);

/// Parameter table (name, shape, group) plus the model config and any extra
/// fields (the serialized run config, training phase, iteration).
nlohmann::json make_manifest(const agent::Navigator& nav, const nlohmann::json& extra = nlohmann::json::object());
void write_manifest(const std::filesystem::path& checkpoint, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& checkpoint);

/// Writes parameters and manifest.
void save_model(const std::filesystem::path& checkpoint, const agent::Navigator& nav,
                const nlohmann::json& extra = nlohmann::json::object());
/// Rebuilds a navigator from a checkpoint and its manifest.
std::unique_ptr<agent::Navigator> load_model(const std::filesystem::path& checkpoint);

}  // namespace duonav::io

#endif  // DUONAV_IO_CHECKPOINT_HPP
