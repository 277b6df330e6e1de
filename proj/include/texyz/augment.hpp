#pragma once

// Shift augmentation: each gesture is re-emitted translated as far as it can
// go right, left, up and down without any active taxel leaving the grid.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/preprocess.hpp"

namespace texyz {

/// Inclusive box in storage coordinates: x = column, y = row (row 0 on top).
struct BoundingBox {
  int x_tl = 0, y_tl = 0, x_br = 0, y_br = 0;
  bool operator==(const BoundingBox&) const = default;
};

struct ShiftAmounts {
  int right = 0, left = 0, up = 0, down = 0;
  bool operator==(const ShiftAmounts&) const = default;
};

inline std::optional<BoundingBox> find_bounding_box(const Recording& r, double threshold) {
  std::optional<BoundingBox> box;
  for (const auto& f : r.frames)
    for (int row = 0; row < kGrid; ++row)
      for (int col = 0; col < kGrid; ++col) {
        if (!(f.at(row, col) > threshold)) continue;
        if (!box) {
          box = BoundingBox{col, row, col, row};
          continue;
        }
        box->x_tl = std::min(box->x_tl, col);
        box->x_br = std::max(box->x_br, col);
        box->y_tl = std::min(box->y_tl, row);
        box->y_br = std::max(box->y_br, row);
      }
  return box;
}

inline BoundingBox bounding_box(const Recording& r, double threshold = kContactThreshold) {
  auto box = find_bounding_box(r, threshold);
  if (!box) throw DomainError("recording '" + r.id + "' has no taxel above the activity threshold");
  return *box;
}

inline ShiftAmounts shift_amounts(const BoundingBox& b) {
  return {kGrid - b.x_br - 1, b.x_tl, b.y_tl, kGrid - b.y_br - 1};
}

/// Translates every frame by dx columns (positive = right) and dy rows
/// (positive = down). Vacated cells become zero. Throws if an active taxel
/// would leave the grid.
inline Recording shift(const Recording& r, int dx, int dy, double threshold = kContactThreshold) {
  if (dx == 0 && dy == 0) return r;
  if (auto box = find_bounding_box(r, threshold)) {
    if (box->x_tl + dx < 0 || box->x_br + dx >= kGrid || box->y_tl + dy < 0 || box->y_br + dy >= kGrid)
      throw DomainError("shift (" + std::to_string(dx) + "," + std::to_string(dy) + ") would truncate the gesture");
  }
  Recording out = r;
  for (std::size_t t = 0; t < r.frames.size(); ++t) {
    auto& dst = out.frames[t];
    dst.p.fill(0.0);
    const auto& src = r.frames[t];
    for (int row = 0; row < kGrid; ++row) {
      const int nr = row + dy;
      if (nr < 0 || nr >= kGrid) continue;
      for (int col = 0; col < kGrid; ++col) {
        const int nc = col + dx;
        if (nc < 0 || nc >= kGrid) continue;
        dst.at(nr, nc) = src.at(row, col);
      }
    }
  }
  return out;
}

struct AugmentResult {
  std::vector<Recording> recordings;
  std::size_t skipped_silent = 0;
};

/// The original plus its four maximal shifts. Zero-amount directions are
/// skipped so no exact duplicates are produced.
inline std::vector<Recording> augment_one(const Recording& g, const BoundingBox& box, double threshold) {
  const ShiftAmounts s = shift_amounts(box);
  std::vector<Recording> out;
  out.push_back(g);
  auto emit = [&](int amount, int dx, int dy, const char* tag) {
    if (amount == 0) return;
    Recording c = shift(g, dx, dy, threshold);
    c.source_id = g.source_id.empty() ? g.id : g.source_id;
    c.id = g.id + "#" + tag + std::to_string(amount);
    out.push_back(std::move(c));
  };
  emit(s.right, s.right, 0, "r");
  emit(s.left, -s.left, 0, "l");
  emit(s.up, 0, -s.up, "u");
  emit(s.down, 0, s.down, "d");
  return out;
}

inline AugmentResult augment_dataset(std::span<const Recording> ds, double threshold = kContactThreshold) {
  AugmentResult res;
  res.recordings.reserve(ds.size() * 5);
  for (const auto& g : ds) {
    auto box = find_bounding_box(g, threshold);
    if (!box) {
      ++res.skipped_silent;
      continue;
    }
    for (auto& c : augment_one(g, *box, threshold)) res.recordings.push_back(std::move(c));
  }
  return res;
}

}  // namespace texyz
