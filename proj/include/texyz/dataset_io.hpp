#pragma once

// Line-delimited JSON datasets: one recording per line with keys
// id, label, participant, tilt_deg, speed, rate_hz, frames (list of
// 81-element lists) and t_ms (per-frame timestamps).

#include <nlohmann/json.hpp>

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "texyz/core.hpp"

namespace texyz {

inline nlohmann::json recording_to_json(const Recording& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["label"] = r.label ? nlohmann::json(std::string(name_of(*r.label))) : nlohmann::json(nullptr);
  j["participant"] = r.participant_id;
  j["tilt_deg"] = r.tilt_deg;
  j["speed"] = std::string(name_of(r.speed));
  j["rate_hz"] = r.rate_hz;
  auto& frames = j["frames"] = nlohmann::json::array();
  auto& stamps = j["t_ms"] = nlohmann::json::array();
  for (const auto& f : r.frames) {
    frames.push_back(f.p);
    stamps.push_back(f.timestamp_ms);
  }
  return j;
}

inline Recording recording_from_json(const nlohmann::json& j) {
  Recording r;
  r.id = j.at("id").get<std::string>();
  const auto& label = j.at("label");
  if (!label.is_null()) r.label = gesture_from_name(label.get<std::string>());
  r.participant_id = j.at("participant").get<std::string>();
  r.tilt_deg = j.at("tilt_deg").get<int>();
  r.speed = speed_from_name(j.at("speed").get<std::string>());
  r.rate_hz = j.at("rate_hz").get<double>();
  const auto& frames = j.at("frames");
  if (!frames.is_array()) throw DataError("frames is not a list");
  const nlohmann::json* stamps = j.contains("t_ms") ? &j.at("t_ms") : nullptr;
  if (stamps && stamps->size() != frames.size()) throw DataError("t_ms length differs from frames");
  r.frames.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& row = frames[t];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(kTaxels))
      throw DataError("frame " + std::to_string(t) + " has " + std::to_string(row.is_array() ? row.size() : 0) +
                      " values, expected 81");
    for (int i = 0; i < kTaxels; ++i) r.frames[t].p[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(i)].get<double>();
    r.frames[t].timestamp_ms =
        stamps ? (*stamps)[t].get<std::int64_t>()
               : static_cast<std::int64_t>(std::llround(1000.0 * static_cast<double>(t) / r.rate_hz));
  }
  validate(r);
  return r;
}

inline std::size_t write_dataset(std::span<const Recording> ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : ds) out << recording_to_json(r).dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
  return ds.size();
}

inline std::vector<Recording> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path);
  std::vector<Recording> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(recording_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace texyz
