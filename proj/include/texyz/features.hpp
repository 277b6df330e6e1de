#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/preprocess.hpp"

namespace texyz {

enum class FeatureSchema { spatio_temporal_v1, touch_pattern_v1 };

inline constexpr std::size_t kSpatioTemporalDim = kTaxels * 20 + 3;  // 1623
inline constexpr std::size_t kTouchPatternDim = 24;

inline std::string_view name_of(FeatureSchema s) {
  return s == FeatureSchema::spatio_temporal_v1 ? "spatio_temporal_v1" : "touch_pattern_v1";
}

inline FeatureSchema schema_from_name(std::string_view n) {
  if (n == "spatio_temporal_v1") return FeatureSchema::spatio_temporal_v1;
  if (n == "touch_pattern_v1") return FeatureSchema::touch_pattern_v1;
  throw SchemaError("unknown feature schema: " + std::string(n));
}

inline std::size_t dimension_of(FeatureSchema s) {
  return s == FeatureSchema::spatio_temporal_v1 ? kSpatioTemporalDim : kTouchPatternDim;
}

struct FeatureVector {
  FeatureSchema schema = FeatureSchema::touch_pattern_v1;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------
// Haar wavelet

inline constexpr std::size_t kDwtLength = 64;

struct DwtBands {
  std::array<double, 32> d1{};
  std::array<double, 16> d2{};
  std::array<double, 8> d3{};
  std::array<double, 8> a3{};
};

/// Three-level orthonormal Haar cascade over a 64-sample series.
inline DwtBands haar_dwt(std::span<const double> series) {
  if (series.size() != kDwtLength)
    throw DomainError("haar_dwt expects 64 samples, got " + std::to_string(series.size()));
  const double r = 1.0 / std::sqrt(2.0);
  std::array<double, 64> approx{};
  for (std::size_t i = 0; i < kDwtLength; ++i) approx[i] = series[i];
  DwtBands out;
  std::size_t n = kDwtLength;
  auto level = [&](std::span<double> detail) {
    const std::size_t half = n / 2;
    std::array<double, 32> next{};
    for (std::size_t i = 0; i < half; ++i) {
      next[i] = (approx[2 * i] + approx[2 * i + 1]) * r;
      detail[i] = (approx[2 * i] - approx[2 * i + 1]) * r;
    }
    std::copy(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(half), approx.begin());
    n = half;
  };
  level(out.d1);
  level(out.d2);
  level(out.d3);
  std::copy(approx.begin(), approx.begin() + 8, out.a3.begin());
  return out;
}

/// [L1, L2, skewness, excess kurtosis, std] from population moments.
/// Skewness and kurtosis collapse to 0 for (near-)constant bands.
inline std::array<double, 5> band_stats(std::span<const double> band) {
  if (band.empty()) throw DomainError("band_stats of an empty band");
  const double n = static_cast<double>(band.size());
  double l1 = 0.0, sq = 0.0, mean = 0.0;
  for (double v : band) {
    l1 += std::abs(v);
    sq += v * v;
    mean += v;
  }
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : band) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  double skew = 0.0, kurt = 0.0;
  if (m2 >= 1e-12) {
    skew = m3 / std::pow(m2, 1.5);
    kurt = m4 / (m2 * m2) - 3.0;
  }
  return {l1, std::sqrt(sq), skew, kurt, std::sqrt(m2)};
}

/// Per taxel (storage order): 4 Haar bands x 5 statistics, then the global
/// mean, max and population variance over every taxel and frame.
inline FeatureVector spatio_temporal_features(const Recording& r) {
  if (r.frames.size() != kDwtLength)
    throw DomainError("spatio-temporal features need a recording padded to 64 frames, got " +
                      std::to_string(r.frames.size()));
  FeatureVector fv{FeatureSchema::spatio_temporal_v1, {}};
  fv.values.reserve(kSpatioTemporalDim);
  std::array<double, kDwtLength> series{};
  double sum = 0.0, sumsq = 0.0, mx = 0.0;
  for (int i = 0; i < kTaxels; ++i) {
    for (std::size_t t = 0; t < kDwtLength; ++t) {
      const double v = r.frames[t].p[static_cast<std::size_t>(i)];
      series[t] = v;
      sum += v;
      mx = std::max(mx, v);
    }
    const DwtBands b = haar_dwt(series);
    for (auto band : {std::span<const double>(b.d1), std::span<const double>(b.d2), std::span<const double>(b.d3),
                      std::span<const double>(b.a3)}) {
      const auto s = band_stats(band);
      fv.values.insert(fv.values.end(), s.begin(), s.end());
    }
  }
  const double count = static_cast<double>(kTaxels) * static_cast<double>(kDwtLength);
  const double mean = sum / count;
  for (const auto& f : r.frames)
    for (double v : f.p) sumsq += (v - mean) * (v - mean);
  fv.values.push_back(mean);
  fv.values.push_back(mx);
  fv.values.push_back(sumsq / count);
  return fv;
}

/// Pressure, variability, row/column profile, contact area and duration.
/// Only the first true_length() frames are considered.
inline FeatureVector touch_pattern_features(const Recording& r, double contact_threshold = kContactThreshold) {
  const std::size_t T = r.true_length();
  if (T == 0) throw DomainError("touch-pattern features of an empty recording");
  FeatureVector fv{FeatureSchema::touch_pattern_v1, std::vector<double>(kTouchPatternDim, 0.0)};
  auto& x = fv.values;
  double sum = 0.0, mx = 0.0, var = 0.0, max_area = 0.0, area_sum = 0.0;
  std::array<double, kGrid> rows{}, cols{};
  for (std::size_t t = 0; t < T; ++t) {
    const Frame& f = r.frames[t];
    double area = 0.0;
    for (int row = 0; row < kGrid; ++row)
      for (int col = 0; col < kGrid; ++col) {
        const double v = f.at(row, col);
        sum += v;
        mx = std::max(mx, v);
        rows[static_cast<std::size_t>(row)] += v;
        cols[static_cast<std::size_t>(col)] += v;
        if (v > contact_threshold) area += 1.0;
      }
    max_area = std::max(max_area, area);
    area_sum += area;
    if (t + 1 < T)
      for (int i = 0; i < kTaxels; ++i)
        var += std::abs(r.frames[t + 1].p[static_cast<std::size_t>(i)] - f.p[static_cast<std::size_t>(i)]);
  }
  const double nT = static_cast<double>(T);
  x[0] = sum / (nT * kTaxels);
  x[1] = mx;
  x[2] = T > 1 ? var / ((nT - 1.0) * kTaxels) : 0.0;
  for (int k = 0; k < kGrid; ++k) {
    x[static_cast<std::size_t>(3 + k)] = rows[static_cast<std::size_t>(k)] / (nT * kGrid);
    x[static_cast<std::size_t>(12 + k)] = cols[static_cast<std::size_t>(k)] / (nT * kGrid);
  }
  x[21] = max_area;
  x[22] = area_sum / nT;
  x[23] = nT / r.rate_hz;
  return fv;
}

// ---------------------------------------------------------------------------
// Motion history image

inline constexpr double kMhiThreshold = 0.1;

using Mhi = std::array<double, kTaxels>;

/// Active taxels are set to 1; everything else fades by 1/T per frame.
inline Mhi mhi(const Recording& r, double threshold = kMhiThreshold) {
  const std::size_t T = r.true_length();
  if (T == 0) throw DomainError("MHI of an empty recording");
  const double decay = 1.0 / static_cast<double>(T);
  Mhi h{};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < static_cast<std::size_t>(kTaxels); ++i)
      h[i] = r.frames[t].p[i] > threshold ? 1.0 : std::max(0.0, h[i] - decay);
  return h;
}

}  // namespace texyz
