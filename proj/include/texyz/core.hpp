#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace texyz {

inline constexpr int kGrid = 9;
inline constexpr int kTaxels = kGrid * kGrid;
inline constexpr int kNumClasses = 10;
inline constexpr double kNominalRateHz = 15.0;

// Error hierarchy. Everything thrown by the library derives from Error so the
// CLI can map failures onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error {
  using Error::Error;
};

// Malformed external data (dataset lines, model files, packets).
struct DataError : Error {
  using Error::Error;
};

struct SchemaError : Error {
  using Error::Error;
};

struct StartupError : Error {
  using Error::Error;
};

/// One 9x9 pressure snapshot, row-major with row 0 the top sensor row.
struct Frame {
  std::array<double, kTaxels> p{};
  std::int64_t timestamp_ms = 0;

  double& at(int row, int col) { return p[static_cast<std::size_t>(row * kGrid + col)]; }
  double at(int row, int col) const { return p[static_cast<std::size_t>(row * kGrid + col)]; }

  double sum() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }

  bool operator==(const Frame&) const = default;
};

inline bool is_valid(const Frame& f) {
  for (double v : f.p)
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
  return true;
}

/// Continuous sensor position. Origin bottom-left, x rightward, y upward.
struct SensorCoord {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const SensorCoord&) const = default;
};

inline int coord_to_index(SensorCoord c) {
  if (!(c.x >= 0.0 && c.x < kGrid && c.y >= 0.0 && c.y < kGrid))
    throw DomainError("sensor coordinate out of bounds");
  const int col = static_cast<int>(std::floor(c.x));
  const int row = (kGrid - 1) - static_cast<int>(std::floor(c.y));
  return row * kGrid + col;
}

// Inverse on the integer lattice: returns the lower-left corner of the cell.
inline SensorCoord index_to_coord(int index) {
  if (index < 0 || index >= kTaxels) throw DomainError("taxel index out of range");
  const int row = index / kGrid;
  const int col = index % kGrid;
  return {static_cast<double>(col), static_cast<double>(kGrid - 1 - row)};
}

// Center of storage cell (row, col) in sensor coordinates.
inline SensorCoord cell_center(int row, int col) {
  return {col + 0.5, (kGrid - 1 - row) + 0.5};
}

enum class Gesture : int {
  tap = 0,
  double_tap,
  swipe_down,
  swipe_up,
  swipe_right,
  swipe_left,
  circle_cw,
  circle_ccw,
  swipe_up_2f,
  swipe_down_2f,
};

inline constexpr std::array<std::string_view, kNumClasses> kGestureNames = {
    "tap",         "double_tap", "swipe_down", "swipe_up",    "swipe_right",
    "swipe_left",  "circle_cw",  "circle_ccw", "swipe_up_2f", "swipe_down_2f"};

inline Gesture label_of_id(int id) {
  if (id < 0 || id >= kNumClasses) throw DomainError("gesture id out of range: " + std::to_string(id));
  return static_cast<Gesture>(id);
}

inline int id_of_label(Gesture g) { return static_cast<int>(g); }

inline std::string_view name_of(Gesture g) { return kGestureNames[static_cast<std::size_t>(g)]; }

inline Gesture gesture_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kGestureNames[static_cast<std::size_t>(i)] == name) return static_cast<Gesture>(i);
  throw DomainError("unknown gesture name: " + std::string(name));
}

enum class Speed : int { slow = 0, regular, fast };

inline std::string_view name_of(Speed s) {
  switch (s) {
    case Speed::slow: return "slow";
    case Speed::regular: return "regular";
    case Speed::fast: return "fast";
  }
  return "regular";
}

inline Speed speed_from_name(std::string_view name) {
  if (name == "slow") return Speed::slow;
  if (name == "regular") return Speed::regular;
  if (name == "fast") return Speed::fast;
  throw DomainError("unknown speed: " + std::string(name));
}

inline constexpr std::array<int, 3> kTilts = {0, 30, 60};

inline bool is_valid_tilt(int deg) { return deg == 0 || deg == 30 || deg == 60; }

/// A gesture sample: an ordered frame sequence plus its collection metadata.
struct Recording {
  std::string id;
  std::vector<Frame> frames;
  std::optional<Gesture> label;
  std::string participant_id;
  int tilt_deg = 0;
  Speed speed = Speed::regular;
  double rate_hz = kNominalRateHz;
  // Frames before this count are real; the rest is zero padding. 0 means all.
  std::size_t valid_frames = 0;
  // Id of the recording this one was derived from (augmentation lineage).
  std::string source_id;

  std::size_t length() const { return frames.size(); }
  std::size_t true_length() const { return valid_frames == 0 ? frames.size() : valid_frames; }

  bool operator==(const Recording&) const = default;
};

// Throws DomainError when the recording breaks a structural invariant.
inline void validate(const Recording& r) {
  if (r.frames.empty()) throw DomainError("recording '" + r.id + "' has no frames");
  if (!is_valid_tilt(r.tilt_deg)) throw DomainError("invalid tilt: " + std::to_string(r.tilt_deg));
  if (r.valid_frames > r.frames.size()) throw DomainError("valid_frames exceeds length");
  for (std::size_t t = 0; t < r.frames.size(); ++t) {
    if (!is_valid(r.frames[t])) throw DomainError("frame " + std::to_string(t) + " has negative or non-finite values");
    if (t > 0 && r.frames[t].timestamp_ms < r.frames[t - 1].timestamp_ms)
      throw DomainError("timestamps decrease at frame " + std::to_string(t));
  }
}

struct Finger {
  SensorCoord pos;
  double mass = 0.0;
};

/// Up to three detected fingers, heaviest first.
struct TrajectoryFrame {
  std::vector<Finger> fingers;
};

}  // namespace texyz
