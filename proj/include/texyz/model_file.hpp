#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "texyz/codec.hpp"
#include "texyz/core.hpp"

namespace texyz {

inline constexpr int kModelFormatVersion = 1;

struct ModelLoadError : DataError {
  using DataError::DataError;
};

/// A named float64 block with its logical shape.
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  bool operator==(const ParamBlock&) const = default;
};

/// On-disk model envelope. Parameters travel as base64 little-endian float64
/// so a save/load cycle is bit-exact.
struct ModelEnvelope {
  int format_version = kModelFormatVersion;
  std::string kind;
  std::string schema;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<ParamBlock> params;

  const ParamBlock& param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p;
    throw ModelLoadError("model file lacks parameter block '" + name + "'");
  }

  void add(std::string name, std::vector<std::size_t> shape, std::vector<double> data) {
    params.push_back({std::move(name), std::move(shape), std::move(data)});
  }
};

inline std::string dump_envelope(const ModelEnvelope& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind;
  j["schema"] = m.schema;
  j["metadata"] = m.metadata;
  auto& params = j["params"] = nlohmann::json::array();
  for (const auto& p : m.params)
    params.push_back({{"name", p.name}, {"shape", p.shape}, {"data", codec::doubles_to_base64(p.data)}});
  return j.dump();
}

inline ModelEnvelope parse_envelope(const std::string& text, const std::vector<std::string>& known_kinds) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ModelLoadError(std::string("model file is not valid JSON: ") + e.what());
  }
  ModelEnvelope m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kModelFormatVersion)
      throw ModelLoadError("unsupported model format version " + std::to_string(m.format_version) +
                           " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    m.kind = j.at("kind").get<std::string>();
    if (std::find(known_kinds.begin(), known_kinds.end(), m.kind) == known_kinds.end())
      throw ModelLoadError("unknown model kind '" + m.kind + "'");
    m.schema = j.at("schema").get<std::string>();
    m.metadata = j.value("metadata", nlohmann::json::object());
    for (const auto& p : j.at("params")) {
      ParamBlock b;
      b.name = p.at("name").get<std::string>();
      b.shape = p.at("shape").get<std::vector<std::size_t>>();
      b.data = codec::base64_to_doubles(p.at("data").get<std::string>());
      const std::size_t expect =
          std::accumulate(b.shape.begin(), b.shape.end(), std::size_t{1}, std::multiplies<>());
      if (expect != b.data.size()) throw ModelLoadError("parameter block '" + b.name + "' size does not match shape");
      m.params.push_back(std::move(b));
    }
  } catch (const ModelLoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelLoadError(std::string("malformed model file: ") + e.what());
  }
  return m;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace texyz
