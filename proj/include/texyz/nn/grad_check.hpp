#pragma once

#include <cmath>

#include "texyz/nn/network.hpp"

namespace texyz::nn {

struct GradCheckReport {
  double max_error = 0.0;
  int checked = 0;
  // Draws rejected because the two one-sided differences disagree by more
  // than 1e-4 relative: a rectifier or max-pool switch inside +-h, or a
  // gradient too small to resolve above rounding. Decided from forward
  // passes only, so it cannot hide a wrong backward pass.
  int skipped_kinks = 0;
};

/// Largest relative gap between analytic and central-difference gradients
/// over `samples` randomly drawn parameters: |ga - gn| / max(1e-8, |ga| + |gn|).
/// Draws pick a parameter block uniformly, then an entry in it, so small
/// layers are checked as often as the large ones.
inline GradCheckReport grad_check_report(Network<double>& net, const Batch<double>& batch, std::uint64_t seed,
                                         int samples = 200, double h = 1e-5) {
  const double base = net.loss(batch, true);
  auto ps = net.params();
  Rng rng(seed);
  GradCheckReport rep;
  for (int attempt = 0; rep.checked < samples && attempt < 50 * samples; ++attempt) {
    const auto k = std::size_t(rng.below(ps.size()));
    const auto i = Eigen::Index(rng.below(std::uint64_t(ps[k]->value.size())));
    double& w = ps[k]->value.data()[i];
    const double analytic = ps[k]->grad.data()[i];
    const double keep = w;
    w = keep + h;
    const double up = net.loss(batch, false);
    w = keep - h;
    const double down = net.loss(batch, false);
    w = keep;
    const double right = up - base, left = base - down;
    if (std::abs(right - left) > 1e-4 * (std::abs(right) + std::abs(left))) {
      ++rep.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    rep.max_error =
        std::max(rep.max_error, std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
    ++rep.checked;
  }
  return rep;
}

inline double grad_check(Network<double>& net, const Batch<double>& batch, std::uint64_t seed, int samples = 200,
                         double h = 1e-5) {
  return grad_check_report(net, batch, seed, samples, h).max_error;
}

/// Random batch for gradient checks: `n` sequences of up to `T` frames with
/// varied lengths (one frame each for the MHI network).
inline Batch<double> random_batch(Arch arch, int n, int T, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample<double>> data(std::size_t(n), Sample<double>{});
  for (int k = 0; k < n; ++k) {
    auto& s = data[std::size_t(k)];
    s.length = is_sequence(arch) ? rng.range(std::max(1, T - 2), T) : 1;
    s.label = k % kNumClasses;
    for (int v = 0; v < s.length * kTaxels; ++v) s.values.push_back(rng.uniform(-1.0, 1.0));
  }
  std::vector<const Sample<double>*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  return make_batch(ptrs);
}

}  // namespace texyz::nn
