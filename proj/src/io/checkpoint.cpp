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

#include "duonav/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace duonav::io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'A', 'N', 'A'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint while reading " + what);
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::vector<CheckpointEntry> entries;
  while (in.peek() != std::char_traits<char>::eof()) {
    CheckpointEntry e;
    const auto len = get<std::uint32_t>(in, "name length");
    if (len > (1u << 16)) throw CheckpointError("implausible parameter name length");
    e.name.resize(len);
    in.read(e.name.data(), len);
    if (!in) throw CheckpointError("truncated checkpoint while reading a name");
    const auto rank = get<std::uint32_t>(in, e.name + " rank");
    if (rank > 8) throw CheckpointError("implausible rank for " + e.name);
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.dims.push_back(get<std::uint64_t>(in, e.name + " dims"));
      count *= e.dims.back();
    }
    if (count > (1ull << 32)) throw CheckpointError("implausible size for " + e.name);
    e.data.resize(count);
    in.read(reinterpret_cast<char*>(e.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint while reading " + e.name);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_parameters(const std::filesystem::path& path, const agent::ParamStore& store) {
  std::vector<CheckpointEntry> entries;
  store.for_each([&](const agent::Param& p) {
    CheckpointEntry e;
    e.name = p.name;
    e.dims = {static_cast<std::uint64_t>(p.value.rows()), static_cast<std::uint64_t>(p.value.cols())};
    e.data.assign(p.value.data(), p.value.data() + p.value.size());
    entries.push_back(std::move(e));
  });
  write_checkpoint(path, entries);
}

void load_parameters(const std::filesystem::path& path, agent::ParamStore& store) {
  const auto entries = read_checkpoint(path);
  if (entries.size() != store.size())
    throw CheckpointError("checkpoint has " + std::to_string(entries.size()) + " tensors, model has " +
                          std::to_string(store.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = store[i];
    const auto& e = entries[i];
    if (e.name != p.name) throw CheckpointError("checkpoint tensor '" + e.name + "' where '" + p.name + "' expected");
    if (e.dims.size() != 2 || e.dims[0] != static_cast<std::uint64_t>(p.value.rows()) ||
        e.dims[1] != static_cast<std::uint64_t>(p.value.cols()))
      throw CheckpointError("shape mismatch for " + p.name);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = store[i];
    for (Eigen::Index j = 0; j < p.value.size(); ++j) p.value.data()[j] = static_cast<Real>(entries[i].data[static_cast<std::size_t>(j)]);
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

std::filesystem::path optimizer_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".opt");
}

nlohmann::json model_config_to_json(const agent::ModelConfig& c) {
  return {{"width", c.attention.width},
          {"heads", c.attention.heads},
          {"ffn_multiplier", c.attention.ffn_multiplier},
          {"language_encoder_depth", c.attention.language_encoder_depth},
          {"route_encoder_depth", c.attention.route_encoder_depth},
          {"language_decoder_depth", c.attention.language_decoder_depth},
          {"route_decoder_depth", c.attention.route_decoder_depth},
          {"visual_dim", c.visual_dim},
          {"views", c.views},
          {"horizon", c.horizon},
          {"max_text_length", c.max_text_length},
          {"vocab_size", c.vocab_size},
          {"min_steps", c.min_steps}};
}

agent::ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    agent::ModelConfig c;
    c.attention.width = j.at("width").get<int>();
    c.attention.heads = j.at("heads").get<int>();
    c.attention.ffn_multiplier = j.at("ffn_multiplier").get<int>();
    c.attention.language_encoder_depth = j.at("language_encoder_depth").get<int>();
    c.attention.route_encoder_depth = j.at("route_encoder_depth").get<int>();
    c.attention.language_decoder_depth = j.at("language_decoder_depth").get<int>();
    c.attention.route_decoder_depth = j.at("route_decoder_depth").get<int>();
    c.visual_dim = j.at("visual_dim").get<int>();
    c.views = j.at("views").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.max_text_length = j.at("max_text_length").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.min_steps = j.at("min_steps").get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed model config: ") + e.what());
  }
}

nlohmann::json make_manifest(const agent::Navigator& nav, const nlohmann::json& extra) {
  nlohmann::json j = extra;
  j["format"] = "LANA";
  j["version"] = kCheckpointVersion;
  j["model"] = model_config_to_json(nav.config());
  auto& params = j["parameters"] = nlohmann::json::array();
  nav.parameters().for_each([&](const agent::Param& p) {
    params.push_back({{"name", p.name},
                      {"shape", {p.value.rows(), p.value.cols()}},
                      {"group", agent::group_name(p.group)}});
  });
  j["parameter_count"] = nav.parameters().total_size();
  return j;
}

void write_manifest(const std::filesystem::path& checkpoint, const nlohmann::json& manifest) {
  std::ofstream out(manifest_path(checkpoint));
  if (!out) throw CheckpointError("cannot write manifest for " + checkpoint.string());
  out << manifest.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::filesystem::path& checkpoint) {
  std::ifstream in(manifest_path(checkpoint));
  if (!in) throw CheckpointError("missing manifest " + manifest_path(checkpoint).string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed manifest: ") + e.what());
  }
}

void save_model(const std::filesystem::path& checkpoint, const agent::Navigator& nav, const nlohmann::json& extra) {
  save_parameters(checkpoint, nav.parameters());
  write_manifest(checkpoint, make_manifest(nav, extra));
}

std::unique_ptr<agent::Navigator> load_model(const std::filesystem::path& checkpoint) {
  const auto manifest = read_manifest(checkpoint);
  if (!manifest.contains("model")) throw CheckpointError("manifest lacks a model block");
  auto nav = std::make_unique<agent::Navigator>(model_config_from_json(manifest.at("model")), 0);
  load_parameters(checkpoint, nav->parameters());
  return nav;
}

}  // namespace duonav::io
