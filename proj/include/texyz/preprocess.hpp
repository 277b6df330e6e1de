#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "texyz/core.hpp"

namespace texyz {

inline constexpr double kContactThreshold = 0.1;
inline constexpr std::size_t kPadLength = 64;

struct PreprocessConfig {
  int window = 3;
  std::size_t pad_length = kPadLength;
  double contact_threshold = kContactThreshold;
};

/// Per-taxel temporal moving mean. The window shrinks at the sequence ends
/// so every output frame averages only real frames.
inline Recording running_average(const Recording& r, int window) {
  if (window < 1 || window % 2 == 0) throw DomainError("running-average window must be odd and >= 1");
  const std::size_t T = r.frames.size();
  if (static_cast<std::size_t>(window) > T)
    throw DomainError("running-average window " + std::to_string(window) + " exceeds length " + std::to_string(T));
  Recording out = r;
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto last = static_cast<std::ptrdiff_t>(T) - 1;
  for (std::ptrdiff_t t = 0; t <= last; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - half);
    const std::ptrdiff_t hi = std::min(last, t + half);
    const double inv = 1.0 / static_cast<double>(hi - lo + 1);
    auto& dst = out.frames[static_cast<std::size_t>(t)].p;
    for (int i = 0; i < kTaxels; ++i) {
      double s = 0.0;
      for (std::ptrdiff_t k = lo; k <= hi; ++k) s += r.frames[static_cast<std::size_t>(k)].p[static_cast<std::size_t>(i)];
      dst[static_cast<std::size_t>(i)] = s * inv;
    }
  }
  return out;
}

/// Joint min-max scaling of every taxel in every frame to [0, 1].
inline Recording normalize(const Recording& r) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& f : r.frames)
    for (double v : f.p) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Recording out = r;
  const double span = hi - lo;
  for (auto& f : out.frames)
    for (double& v : f.p) v = span > 0.0 ? (v - lo) / span : 0.0;
  return out;
}

inline Recording pad_to_length(const Recording& r, std::size_t length) {
  const std::size_t T = r.frames.size();
  if (T > length)
    throw DomainError("recording of " + std::to_string(T) + " frames exceeds pad length " + std::to_string(length));
  Recording out = r;
  out.valid_frames = r.true_length();
  const auto period = static_cast<std::int64_t>(std::llround(1000.0 / r.rate_hz));
  std::int64_t stamp = T ? r.frames.back().timestamp_ms : 0;
  out.frames.reserve(length);
  while (out.frames.size() < length) {
    Frame f;
    stamp += period;
    f.timestamp_ms = stamp;
    out.frames.push_back(f);
  }
  return out;
}

inline Recording truncate(const Recording& r, std::size_t length) {
  Recording out = r;
  if (out.frames.size() > length) out.frames.resize(length);
  if (out.valid_frames >= out.frames.size()) out.valid_frames = 0;
  return out;
}

/// Fingers are the 4-connected components of above-threshold taxels; each
/// reports its pressure-weighted centroid. At most three, heaviest first.
inline TrajectoryFrame extract_trajectory(const Frame& f, double threshold = kContactThreshold) {
  std::array<int, kTaxels> component;
  component.fill(-1);
  std::vector<Finger> found;
  std::array<int, kTaxels> stack{};
  for (int seed = 0; seed < kTaxels; ++seed) {
    if (component[static_cast<std::size_t>(seed)] >= 0 || !(f.p[static_cast<std::size_t>(seed)] > threshold)) continue;
    const int id = static_cast<int>(found.size());
    double mass = 0.0, mx = 0.0, my = 0.0;
    int top = 0;
    stack[static_cast<std::size_t>(top++)] = seed;
    component[static_cast<std::size_t>(seed)] = id;
    while (top > 0) {
      const int cell = stack[static_cast<std::size_t>(--top)];
      const int row = cell / kGrid, col = cell % kGrid;
      const double v = f.p[static_cast<std::size_t>(cell)];
      const SensorCoord c = cell_center(row, col);
      mass += v;
      mx += v * c.x;
      my += v * c.y;
      const int nbr[4][2] = {{row - 1, col}, {row + 1, col}, {row, col - 1}, {row, col + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[0] >= kGrid || n[1] < 0 || n[1] >= kGrid) continue;
        const int k = n[0] * kGrid + n[1];
        if (component[static_cast<std::size_t>(k)] >= 0 || !(f.p[static_cast<std::size_t>(k)] > threshold)) continue;
        component[static_cast<std::size_t>(k)] = id;
        stack[static_cast<std::size_t>(top++)] = k;
      }
    }
    found.push_back({{mx / mass, my / mass}, mass});
  }
  std::stable_sort(found.begin(), found.end(), [](const Finger& a, const Finger& b) { return a.mass > b.mass; });
  if (found.size() > 3) found.resize(3);
  return {std::move(found)};
}

/// Standard chain applied before any featurizer: moving-average filter
/// (window clipped to the recording length), joint normalization, and
/// truncation to the pad budget.
inline Recording prepare(const Recording& r, const PreprocessConfig& cfg = {}) {
  const int T = static_cast<int>(r.true_length());
  Recording base = r.valid_frames ? truncate(r, r.valid_frames) : r;
  int window = std::min(cfg.window, T % 2 == 1 ? T : T - 1);
  if (window < 1) window = 1;
  return truncate(normalize(running_average(base, window)), cfg.pad_length);
}

}  // namespace texyz
