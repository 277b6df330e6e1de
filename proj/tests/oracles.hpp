#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Each takes a different route from the code it checks.

#include <cstring>
#include <map>
#include <set>

#include "texyz/augment.hpp"
#include "texyz/features.hpp"
#include "texyz/ml/common.hpp"
#include "texyz/rng.hpp"

namespace texyz::oracle {

// Explicit orthonormal Haar analysis matrix, rows ordered d1, d2, d3, a3.
inline std::vector<std::vector<double>> haar_matrix() {
  std::vector<std::vector<double>> H;
  auto block_row = [](int start, int width, bool detail) {
    std::vector<double> row(64, 0.0);
    const double scale = 1.0 / std::sqrt(double(width));
    for (int k = 0; k < width; ++k) row[std::size_t(start + k)] = (detail && k >= width / 2) ? -scale : scale;
    return row;
  };
  for (int width : {2, 4, 8})
    for (int s = 0; s < 64; s += width) H.push_back(block_row(s, width, true));
  for (int s = 0; s < 64; s += 8) H.push_back(block_row(s, 8, false));
  return H;
}

inline std::vector<double> flatten(const DwtBands& b) {
  std::vector<double> v(b.d1.begin(), b.d1.end());
  v.insert(v.end(), b.d2.begin(), b.d2.end());
  v.insert(v.end(), b.d3.begin(), b.d3.end());
  v.insert(v.end(), b.a3.begin(), b.a3.end());
  return v;
}

// Moments through raw power sums, a different algebraic route from the
// centered accumulation used by band_stats. Power sums cancel badly when the
// spread is tiny next to the mean, so they are taken about the first sample
// (moments are shift invariant) and accumulated in long double.
inline std::array<double, 5> moments(const std::vector<double>& x) {
  using L = long double;
  const L n = L(x.size()), origin = x.front();
  L s1 = 0, s2 = 0, s3 = 0, s4 = 0, l1 = 0, raw2 = 0;
  for (double xv : x) {
    const L v = L(xv) - origin;
    l1 += std::abs(L(xv));
    raw2 += L(xv) * L(xv);
    s1 += v;
    s2 += v * v;
    s3 += v * v * v;
    s4 += v * v * v * v;
  }
  const L mu = s1 / n, e2 = s2 / n, e3 = s3 / n, e4 = s4 / n;
  const L m2 = e2 - mu * mu;
  const L m3 = e3 - 3 * mu * e2 + 2 * mu * mu * mu;
  const L m4 = e4 - 4 * mu * e3 + 6 * mu * mu * e2 - 3 * mu * mu * mu * mu;
  const bool degenerate = m2 < 1e-12L;
  return {double(l1), double(std::sqrt(raw2)), degenerate ? 0.0 : double(m3 / std::pow(m2, L(1.5))),
          degenerate ? 0.0 : double(m4 / (m2 * m2) - 3), double(std::sqrt(std::max(L(0), m2)))};
}

inline ml::Matrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
  ml::Matrix X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal() * scale;
  return X;
}

// Brute-force K-NN with the documented tie rules: majority, then smaller
// mean distance, then lower class id.
inline int knn(const ml::Matrix& X, const std::vector<int>& y, const ml::Vector& x, int k) {
  std::vector<std::pair<double, int>> all;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double d = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) d += (X(i, j) - x(j)) * (X(i, j) - x(j));
    all.push_back({d, y[std::size_t(i)]});
  }
  std::sort(all.begin(), all.end());
  std::map<int, std::pair<int, double>> tally;
  for (int i = 0; i < k; ++i) {
    tally[all[std::size_t(i)].second].first++;
    tally[all[std::size_t(i)].second].second += std::sqrt(all[std::size_t(i)].first);
  }
  int best = -1;
  for (const auto& [c, t] : tally) {
    if (best < 0) {
      best = c;
      continue;
    }
    const auto& b = tally[best];
    if (t.first > b.first || (t.first == b.first && t.second / t.first < b.second / b.first)) best = c;
  }
  return best;
}

// b + sum_i coef_i exp(-gamma |sv_i - x|^2), summed term by term.
inline double rbf_decision(const ml::Matrix& sv, const ml::Vector& coef, double b, double gamma, const ml::Vector& x) {
  double ref = b;
  for (Eigen::Index i = 0; i < sv.rows(); ++i) {
    double d = 0;
    for (Eigen::Index j = 0; j < sv.cols(); ++j) d += (sv(i, j) - x(j)) * (sv(i, j) - x(j));
    ref += coef(i) * std::exp(-gamma * d);
  }
  return ref;
}

// Random gesture with zero background inside a random box.
inline Recording random_clean_gesture(Rng& rng) {
  const int w = rng.range(1, 9), h = rng.range(1, 9);
  const int c0 = rng.range(0, 9 - w), r0 = rng.range(0, 9 - h);
  Recording r;
  r.id = "rand";
  r.label = label_of_id(rng.range(0, 9));
  const int T = rng.range(1, 10);
  for (int t = 0; t < T; ++t) {
    Frame f;
    for (int row = r0; row < r0 + h; ++row)
      for (int col = c0; col < c0 + w; ++col)
        if (rng.uniform() < 0.5) f.at(row, col) = rng.uniform(0.11, 1.0);
    f.timestamp_ms = t * 67;
    r.frames.push_back(f);
  }
  // Pin the corners so the box is exactly (c0, r0, c0+w-1, r0+h-1).
  r.frames[0].at(r0, c0) = 0.5;
  r.frames[0].at(r0 + h - 1, c0 + w - 1) = 0.5;
  return r;
}

inline double total_mass(const Recording& r) {
  double s = 0;
  for (const auto& f : r.frames) s += f.sum();
  return s;
}

// Enumerate every translation that keeps each active cell on the grid and
// keep the four axis-aligned extremes, in right, left, up, down order.
inline std::vector<std::pair<int, int>> extreme_shifts(const Recording& r, double thr) {
  std::vector<std::pair<int, int>> active;
  for (const auto& f : r.frames)
    for (int row = 0; row < 9; ++row)
      for (int col = 0; col < 9; ++col)
        if (f.at(row, col) > thr) active.emplace_back(row, col);
  std::set<std::pair<int, int>> legal;
  for (int dx = -8; dx <= 8; ++dx)
    for (int dy = -8; dy <= 8; ++dy) {
      bool ok = true;
      for (auto [row, col] : active)
        if (row + dy < 0 || row + dy > 8 || col + dx < 0 || col + dx > 8) ok = false;
      if (ok) legal.insert({dx, dy});
    }
  int right = 0, left = 0, up = 0, down = 0;
  for (auto [dx, dy] : legal) {
    if (dy == 0) {
      right = std::max(right, dx);
      left = std::min(left, dx);
    }
    if (dx == 0) {
      up = std::min(up, dy);
      down = std::max(down, dy);
    }
  }
  std::vector<std::pair<int, int>> out;
  if (right) out.emplace_back(right, 0);
  if (left) out.emplace_back(left, 0);
  if (up) out.emplace_back(0, up);
  if (down) out.emplace_back(0, down);
  return out;
}

inline Frame uniform_frame(double v) {
  Frame f;
  f.p.fill(v);
  return f;
}

// Hand-assembled OSC frame message, independent of the encoder.
inline std::vector<std::uint8_t> frame_packet(const Frame& f) {
  std::vector<std::uint8_t> b;
  const char addr[] = "/texyz/frame";  // 12 chars + NUL -> 16
  b.insert(b.end(), addr, addr + 12);
  b.insert(b.end(), 4, 0);
  b.push_back(',');
  b.insert(b.end(), 81, 'f');  // 82 chars + NUL -> 84
  b.insert(b.end(), 2, 0);
  for (double v : f.p) {
    const float x = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &x, 4);
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(u >> s));
  }
  return b;
}

// Golden bundle: immediate time tag, two 424-byte frame elements.
inline std::vector<std::uint8_t> golden_bundle(const Frame& a, const Frame& b) {
  std::vector<std::uint8_t> golden = {'#', 'b', 'u', 'n', 'd', 'l', 'e', 0, 0, 0, 0, 0, 0, 0, 0, 1};
  for (const Frame* f : {&a, &b}) {
    golden.insert(golden.end(), {0x00, 0x00, 0x01, 0xA8});
    const auto m = frame_packet(*f);
    golden.insert(golden.end(), m.begin(), m.end());
  }
  return golden;
}

}  // namespace texyz::oracle
