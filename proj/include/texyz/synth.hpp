#pragma once

// Parametric gesture generator. Each virtual participant is a seeded bundle
// of finger width, pressure, speed bias, position bias and a per-taxel gain
// field; each recording renders a class-specific finger path as Gaussian
// footprints plus clipped sensor noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/rng.hpp"

namespace texyz {

struct VirtualParticipant {
  int index = 0;
  std::string id;
  double finger_sigma = 0.9;
  double amplitude = 0.75;
  double speed_bias = 1.0;
  SensorCoord position_bias{};
  std::array<double, kTaxels> gain_field{};
};

struct FrameRange {
  int lo = 0;
  int hi = 0;
};

struct SynthSpec {
  int participants = 34;
  // Index of the first participant; non-zero values produce people unseen in
  // a default corpus.
  int first_participant = 0;
  int repetitions = 1;  // per (gesture, speed, tilt)
  double noise_sigma = 0.02;
  // Readings below this after noise are reported as zero (sensor deadband).
  double noise_floor = 0.05;
  double quantum = 1e-3;
  double rate_hz = kNominalRateHz;
  // Indexed by Speed: slow, regular, fast.
  std::array<FrameRange, 3> motion_frames{{{18, 30}, {10, 18}, {6, 10}}};
  std::array<FrameRange, 3> press_frames{{{3, 4}, {2, 4}, {2, 3}}};
  std::array<FrameRange, 3> gap_frames{{{4, 5}, {3, 4}, {2, 3}}};
  FrameRange margin_frames{1, 2};
  double swipe_length_min = 6.0, swipe_length_max = 7.5;
  double circle_radius_min = 2.0, circle_radius_max = 3.2;
  double separation_min = 2.0, separation_max = 3.0;
  double path_jitter = 0.15;
  double second_tap_offset = 0.5;
  double position_spread = 1.5;
  // Strokes are drawn through the middle of the pad: the spread of the
  // along-stroke position of swipes and of circle centers.
  double stroke_spread = 0.4;
  // Pressure at lift-off relative to touch-down for strokes.
  double release_min = 0.2, release_max = 0.35;
  // Strokes start slowly: progress along the path is (k/(D-1))^stroke_ease.
  double stroke_ease = 2.0;
  double tilt_gradient = 0.05;  // across all rows at 60 degrees

  int recordings_per_participant() const { return kNumClasses * 9 * repetitions; }
  int total() const { return participants * recordings_per_participant(); }
};

inline VirtualParticipant make_participant(std::uint64_t corpus_seed, int index) {
  Rng rng(mix_seed(mix_seed(corpus_seed, 0x7061727469636970ULL), static_cast<std::uint64_t>(index)));
  VirtualParticipant p;
  p.index = index;
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%02d", index);
  p.id = buf;
  p.finger_sigma = rng.uniform(0.6, 1.2);
  p.amplitude = rng.uniform(0.5, 1.0);
  p.speed_bias = rng.uniform(0.8, 1.25);
  p.position_bias = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  for (double& g : p.gain_field) g = rng.uniform(0.9, 1.1);
  return p;
}

namespace detail {

struct Contact {
  SensorCoord pos;
  double pressure = 0.0;  // peak footprint height
};

inline double clamp_to(double v, double lo, double hi) { return lo > hi ? 0.5 * (lo + hi) : std::clamp(v, lo, hi); }

// Noise-free footprint sum with gain field and tilt gradient applied.
inline Frame render(const std::vector<Contact>& contacts, const VirtualParticipant& who, int tilt_deg,
                    double tilt_gradient) {
  Frame f;
  const double inv = 1.0 / (2.0 * who.finger_sigma * who.finger_sigma);
  const double slope = tilt_gradient * tilt_deg / 60.0;
  for (int row = 0; row < kGrid; ++row)
    for (int col = 0; col < kGrid; ++col) {
      const SensorCoord c = cell_center(row, col);
      double v = 0.0;
      for (const auto& k : contacts) {
        const double dx = c.x - k.pos.x, dy = c.y - k.pos.y;
        v += k.pressure * std::exp(-(dx * dx + dy * dy) * inv);
      }
      const double tilt = 1.0 + slope * (row - (kGrid - 1) / 2.0) / (kGrid - 1);
      f.at(row, col) = v * who.gain_field[static_cast<std::size_t>(row * kGrid + col)] * tilt;
    }
  return f;
}

inline int scaled_duration(FrameRange r, double bias, Rng& rng) {
  const double d = rng.uniform(r.lo, r.hi) * bias;
  return std::clamp(static_cast<int>(std::lround(d)), 6, 30);
}

}  // namespace detail

/// Path plan for one recording: per frame, the contacts that are down.
/// Exposed so tests can check geometry without sensor noise.
inline std::vector<std::vector<detail::Contact>> plan_gesture(Gesture g, const VirtualParticipant& who, Speed speed,
                                                              Rng& rng, const SynthSpec& spec = {}) {
  using detail::Contact;
  const auto si = static_cast<std::size_t>(speed);
  const double amp = who.amplitude * rng.uniform(0.9, 1.1);
  const double mid = kGrid / 2.0;
  auto center = [&](double lo_x, double hi_x, double lo_y, double hi_y, double spread_x, double spread_y) {
    return SensorCoord{detail::clamp_to(mid + who.position_bias.x + rng.normal(0.0, spread_x), lo_x, hi_x),
                       detail::clamp_to(mid + who.position_bias.y + rng.normal(0.0, spread_y), lo_y, hi_y)};
  };
  const double wide = spec.position_spread, narrow = spec.stroke_spread;
  std::vector<std::vector<Contact>> plan;

  auto pulse = [&](SensorCoord at, int frames) {
    for (int k = 0; k < frames; ++k)
      plan.push_back({Contact{at, amp * std::sin(std::numbers::pi * (k + 0.5) / frames)}});
  };

  switch (g) {
    case Gesture::tap: {
      pulse(center(1.0, 8.0, 1.0, 8.0, wide, wide), rng.range(spec.press_frames[si].lo, spec.press_frames[si].hi));
      break;
    }
    case Gesture::double_tap: {
      const SensorCoord first = center(1.5, 7.5, 1.5, 7.5, wide, wide);
      pulse(first, rng.range(spec.press_frames[si].lo, spec.press_frames[si].hi));
      const int gap = rng.range(spec.gap_frames[si].lo, spec.gap_frames[si].hi);
      for (int k = 0; k < gap; ++k) plan.emplace_back();
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rad = spec.second_tap_offset * std::sqrt(rng.uniform());
      pulse({first.x + rad * std::cos(ang), first.y + rad * std::sin(ang)},
            rng.range(spec.press_frames[si].lo, spec.press_frames[si].hi));
      break;
    }
    case Gesture::swipe_down:
    case Gesture::swipe_up:
    case Gesture::swipe_right:
    case Gesture::swipe_left:
    case Gesture::swipe_up_2f:
    case Gesture::swipe_down_2f: {
      const bool two = g == Gesture::swipe_up_2f || g == Gesture::swipe_down_2f;
      double ux = 0.0, uy = 0.0;
      switch (g) {
        case Gesture::swipe_up:
        case Gesture::swipe_up_2f: uy = 1.0; break;
        case Gesture::swipe_right: ux = 1.0; break;
        case Gesture::swipe_left: ux = -1.0; break;
        default: uy = -1.0;
      }
      const double len = rng.uniform(spec.swipe_length_min, spec.swipe_length_max);
      const double sep = two ? rng.uniform(spec.separation_min, spec.separation_max) : 0.0;
      // Along-axis extent must keep both ends on the sensor; the
      // perpendicular extent must keep every finger on it.
      const double along_lo = 0.5 + len / 2.0, along_hi = kGrid - 0.5 - len / 2.0;
      const double perp_lo = 1.0 + sep / 2.0, perp_hi = kGrid - 1.0 - sep / 2.0;
      const bool vertical = uy != 0.0;
      const SensorCoord c = vertical ? center(perp_lo, perp_hi, along_lo, along_hi, wide, narrow)
                                     : center(along_lo, along_hi, perp_lo, perp_hi, narrow, wide);
      const int D = detail::scaled_duration(spec.motion_frames[si], who.speed_bias, rng);
      const double release = rng.uniform(spec.release_min, spec.release_max);
      const double px = -uy, py = ux;  // perpendicular unit vector
      for (int k = 0; k < D; ++k) {
        const double s = static_cast<double>(k) / (D - 1);
        const double along = (std::pow(s, spec.stroke_ease) - 0.5) * len;
        const double p = amp * (1.0 - (1.0 - release) * s);
        std::vector<Contact> fingers;
        for (int f = 0; f < (two ? 2 : 1); ++f) {
          const double off = two ? (f == 0 ? -sep / 2.0 : sep / 2.0) : 0.0;
          const double j = rng.normal(0.0, spec.path_jitter);
          fingers.push_back({{c.x + ux * along + px * (off + j), c.y + uy * along + py * (off + j)}, p});
        }
        plan.push_back(std::move(fingers));
      }
      break;
    }
    case Gesture::circle_cw:
    case Gesture::circle_ccw: {
      const double R = rng.uniform(spec.circle_radius_min, spec.circle_radius_max);
      const SensorCoord c = center(0.5 + R, kGrid - 0.5 - R, 0.5 + R, kGrid - 0.5 - R, narrow, narrow);
      const int D = detail::scaled_duration(spec.motion_frames[si], who.speed_bias, rng);
      const double release = rng.uniform(spec.release_min, spec.release_max);
      const double start = std::numbers::pi / 2.0 + rng.uniform(-std::numbers::pi / 6.0, std::numbers::pi / 6.0);
      const double dir = g == Gesture::circle_cw ? -1.0 : 1.0;
      for (int k = 0; k < D; ++k) {
        const double s = static_cast<double>(k) / (D - 1);
        const double a = start + dir * 2.0 * std::numbers::pi * std::pow(s, spec.stroke_ease);
        const double r = R + rng.normal(0.0, spec.path_jitter);
        plan.push_back({Contact{{c.x + r * std::cos(a), c.y + r * std::sin(a)}, amp * (1.0 - (1.0 - release) * s)}});
      }
      break;
    }
  }
  return plan;
}

/// One labeled recording. Silent margins precede and follow the gesture.
inline Recording synth_gesture(Gesture g, const VirtualParticipant& who, Speed speed, int tilt_deg, Rng& rng,
                               const SynthSpec& spec = {}) {
  if (!is_valid_tilt(tilt_deg)) throw DomainError("invalid tilt: " + std::to_string(tilt_deg));
  const auto plan = plan_gesture(g, who, speed, rng, spec);
  const int lead = rng.range(spec.margin_frames.lo, spec.margin_frames.hi);
  const int trail = rng.range(spec.margin_frames.lo, spec.margin_frames.hi);
  Recording r;
  r.label = g;
  r.participant_id = who.id;
  r.tilt_deg = tilt_deg;
  r.speed = speed;
  r.rate_hz = spec.rate_hz;
  const std::size_t T = plan.size() + static_cast<std::size_t>(lead + trail);
  r.frames.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const bool active = t >= static_cast<std::size_t>(lead) && t < static_cast<std::size_t>(lead) + plan.size();
    Frame f = active ? detail::render(plan[t - static_cast<std::size_t>(lead)], who, tilt_deg, spec.tilt_gradient)
                     : Frame{};
    for (double& v : f.p) {
      v = std::max(0.0, v + rng.normal(0.0, spec.noise_sigma));
      if (v < spec.noise_floor) v = 0.0;
      if (spec.quantum > 0.0) v = std::round(v / spec.quantum) * spec.quantum;
    }
    f.timestamp_ms = std::llround(static_cast<double>(t) * 1000.0 / spec.rate_hz);
    r.frames.push_back(f);
  }
  return r;
}

/// Full corpus ordered participant, gesture, speed, tilt, repetition. Each
/// recording draws from its own stream seeded by (corpus_seed, index).
inline std::vector<Recording> synth_dataset(const SynthSpec& spec, std::uint64_t corpus_seed) {
  if (spec.participants < 0 || spec.repetitions < 1) throw DomainError("invalid synth spec");
  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(spec.total()));
  for (int pi = 0; pi < spec.participants; ++pi) {
    const int index = spec.first_participant + pi;
    const auto who = make_participant(corpus_seed, index);
    auto serial = static_cast<std::uint64_t>(index) * static_cast<std::uint64_t>(spec.recordings_per_participant());
    for (int g = 0; g < kNumClasses; ++g)
      for (Speed speed : {Speed::slow, Speed::regular, Speed::fast})
        for (int tilt : kTilts)
          for (int rep = 0; rep < spec.repetitions; ++rep) {
            Rng rng(mix_seed(corpus_seed, serial++));
            auto r = synth_gesture(label_of_id(g), who, speed, tilt, rng, spec);
            r.id = who.id + "-" + std::string(name_of(label_of_id(g))) + "-" + std::string(name_of(speed)) + "-t" +
                   std::to_string(tilt) + "-r" + std::to_string(rep);
            out.push_back(std::move(r));
          }
  }
  return out;
}

}  // namespace texyz
