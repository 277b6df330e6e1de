#pragma once

// Offline evaluation (stratified split, leave-one-subject-out search,
// confusion matrices) and the online segmenter.

#include <algorithm>
#include <array>
#include <chrono>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "texyz/augment.hpp"
#include "texyz/core.hpp"
#include "texyz/rng.hpp"

namespace texyz {

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  double train_fraction = 0.85;
  std::uint64_t seed = 1;
  bool augment = false;
  // When augmenting, only the training partition is augmented (after the
  // split), so no shifted copy of a test recording can leak into training.
  bool augment_train_only = true;
};

struct Split {
  std::vector<Recording> train;
  std::vector<Recording> test;
};

inline const std::string& lineage_of(const Recording& r) { return r.source_id.empty() ? r.id : r.source_id; }

/// Per-class train counts: floor of the fraction, then the remaining slots up
/// to round(fraction * total) go to the largest remainders (ties: lower id).
inline std::array<std::size_t, kNumClasses> stratified_counts(const std::array<std::size_t, kNumClasses>& n,
                                                              double fraction) {
  std::array<std::size_t, kNumClasses> take{};
  std::array<double, kNumClasses> rem{};
  std::size_t total = 0, assigned = 0;
  for (std::size_t c = 0; c < n.size(); ++c) {
    const double exact = fraction * static_cast<double>(n[c]);
    take[c] = static_cast<std::size_t>(std::floor(exact));
    rem[c] = exact - static_cast<double>(take[c]);
    total += n[c];
    assigned += take[c];
  }
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> order(n.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k)
    if (take[order[k]] < n[order[k]]) {
      ++take[order[k]];
      ++assigned;
    }
  return take;
}

inline Split split(std::span<const Recording> ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw DomainError("train fraction must lie in (0, 1)");
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds[i].label) throw DataError("recording '" + ds[i].id + "' is unlabeled");
    members[static_cast<std::size_t>(id_of_label(*ds[i].label))].push_back(i);
  }
  std::array<std::size_t, kNumClasses> n{};
  for (std::size_t c = 0; c < members.size(); ++c) {
    n[c] = members[c].size();
    if (n[c] == 1)
      throw DataError("class '" + std::string(name_of(label_of_id(int(c)))) + "' has fewer than 2 recordings");
  }
  const auto take = stratified_counts(n, spec.train_fraction);
  Rng rng(mix_seed(spec.seed, 0x73706c6974ULL));
  std::vector<char> in_train(ds.size(), 0);
  for (std::size_t c = 0; c < members.size(); ++c) {
    rng.shuffle(members[c].begin(), members[c].end());
    for (std::size_t k = 0; k < take[c]; ++k) in_train[members[c][k]] = 1;
  }
  Split s;
  for (std::size_t i = 0; i < ds.size(); ++i) (in_train[i] ? s.train : s.test).push_back(ds[i]);
  if (spec.augment) {
    s.train = augment_dataset(s.train).recordings;
    if (!spec.augment_train_only) s.test = augment_dataset(s.test).recordings;
  }
  return s;
}

/// Ids of test recordings whose lineage also appears in train.
inline std::vector<std::string> leaked_ids(const Split& s) {
  std::set<std::string> train;
  for (const auto& r : s.train) train.insert(lineage_of(r));
  std::vector<std::string> out;
  for (const auto& r : s.test)
    if (train.count(lineage_of(r))) out.push_back(r.id);
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrix

struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};  // [true][predicted]

  void add(int truth, int predicted) {
    if (truth < 0 || truth >= kNumClasses || predicted < 0 || predicted >= kNumClasses)
      throw DomainError("class id out of range");
    ++counts[std::size_t(truth)][std::size_t(predicted)];
  }

  long total() const {
    long t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), 0L);
    return t;
  }
  long trace() const {
    long t = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) t += counts[c][c];
    return t;
  }
  double accuracy() const { return total() == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(total()); }

  long row_sum(int c) const {
    const auto& row = counts[std::size_t(c)];
    return std::accumulate(row.begin(), row.end(), 0L);
  }
  long column_sum(int c) const {
    long s = 0;
    for (const auto& row : counts) s += row[std::size_t(c)];
    return s;
  }
  double recall(int c) const {
    const long n = row_sum(c);
    return n == 0 ? 0.0 : double(counts[std::size_t(c)][std::size_t(c)]) / double(n);
  }
  double precision(int c) const {
    const long n = column_sum(c);
    return n == 0 ? 0.0 : double(counts[std::size_t(c)][std::size_t(c)]) / double(n);
  }

  /// Unordered class pairs ranked by off-diagonal confusions in both
  /// directions, largest first (ties: lower ids first).
  std::vector<std::pair<std::pair<int, int>, long>> confused_pairs() const {
    std::vector<std::pair<std::pair<int, int>, long>> out;
    for (int a = 0; a < kNumClasses; ++a)
      for (int b = a + 1; b < kNumClasses; ++b)
        out.push_back({{a, b}, counts[std::size_t(a)][std::size_t(b)] + counts[std::size_t(b)][std::size_t(a)]});
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    return out;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DomainError("truth and prediction counts differ");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

/// Runs `predict` over the labeled test set.
inline ConfusionMatrix evaluate(const std::function<int(const Recording&)>& predict, std::span<const Recording> test) {
  ConfusionMatrix m;
  for (const auto& r : test) {
    if (!r.label) throw DataError("recording '" + r.id + "' is unlabeled");
    m.add(id_of_label(*r.label), predict(r));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Leave-one-subject-out search

inline constexpr int kLosoFolds = 5;

struct LosoResult {
  std::size_t best = 0;                          // index into the grid
  std::vector<std::string> held_out;             // participant per fold
  std::vector<std::vector<double>> fold_scores;  // [grid point][fold]
  std::vector<double> mean_scores;
};

/// `fit_score(train, held_out, grid_index)` trains on `train` and returns the
/// accuracy on `held_out`. A DomainError from it marks the grid point as
/// infeasible for that fold and scores it 0.
using FoldScorer =
    std::function<double(const std::vector<Recording>&, const std::vector<Recording>&, std::size_t grid_index)>;

inline LosoResult loso_cv(std::span<const Recording> data, std::size_t grid_size, const FoldScorer& fit_score,
                          std::uint64_t seed) {
  if (grid_size == 0) throw DomainError("empty hyperparameter grid");
  std::set<std::string> ids;
  for (const auto& r : data) {
    if (r.participant_id.empty()) throw DataError("recording '" + r.id + "' has no participant id");
    ids.insert(r.participant_id);
  }
  if (ids.size() < static_cast<std::size_t>(kLosoFolds))
    throw DataError("leave-one-subject-out needs at least 5 participants, found " + std::to_string(ids.size()));
  std::vector<std::string> people(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x6c6f736fULL));
  rng.shuffle(people.begin(), people.end());
  people.resize(kLosoFolds);

  LosoResult res;
  res.held_out = people;
  res.fold_scores.assign(grid_size, std::vector<double>(kLosoFolds, 0.0));
  for (int f = 0; f < kLosoFolds; ++f) {
    std::vector<Recording> train, held;
    for (const auto& r : data) (r.participant_id == people[std::size_t(f)] ? held : train).push_back(r);
    for (std::size_t g = 0; g < grid_size; ++g) {
      try {
        res.fold_scores[g][std::size_t(f)] = fit_score(train, held, g);
      } catch (const DomainError&) {
        res.fold_scores[g][std::size_t(f)] = 0.0;
      }
    }
  }
  for (const auto& s : res.fold_scores) res.mean_scores.push_back(std::accumulate(s.begin(), s.end(), 0.0) / kLosoFolds);
  for (std::size_t g = 1; g < grid_size; ++g)
    if (res.mean_scores[g] > res.mean_scores[res.best]) res.best = g;
  return res;
}

// ---------------------------------------------------------------------------
// Online segmentation

struct SegmenterConfig {
  double taxel_on = 0.15;
  double sum_on = 0.5;
  int k_gap = 8;
  int max_segment = 120;
  double rate_hz = kNominalRateHz;
};

inline bool is_active(const Frame& f, const SegmenterConfig& cfg) {
  double sum = 0.0;
  for (double v : f.p) {
    if (v > cfg.taxel_on) return true;
    sum += v;
  }
  return sum > cfg.sum_on;
}

/// IDLE until an active frame arrives; ACTIVE collects frames until k_gap
/// consecutive inactive frames (or max_segment frames) and then emits the
/// segment with its trailing silence trimmed. Interior gaps are kept.
class Segmenter {
 public:
  explicit Segmenter(SegmenterConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.k_gap < 1 || cfg_.max_segment < 1) throw DomainError("invalid segmenter configuration");
  }

  bool active() const { return !frames_.empty(); }
  const SegmenterConfig& config() const { return cfg_; }

  std::optional<Recording> feed(const Frame& f) {
    const bool on = is_active(f, cfg_);
    if (frames_.empty()) {
      if (!on) return std::nullopt;
      gap_ = 0;
    }
    frames_.push_back(f);
    gap_ = on ? 0 : gap_ + 1;
    if (gap_ >= cfg_.k_gap || static_cast<int>(frames_.size()) >= cfg_.max_segment) return emit();
    return std::nullopt;
  }

  /// Emits whatever is pending (end of stream).
  std::optional<Recording> flush() {
    if (frames_.empty()) return std::nullopt;
    return emit();
  }

 private:
  Recording emit() {
    Recording r;
    r.rate_hz = cfg_.rate_hz;
    const std::size_t keep = frames_.size() - static_cast<std::size_t>(gap_);
    r.frames.assign(frames_.begin(), frames_.begin() + static_cast<std::ptrdiff_t>(keep));
    r.id = "seg@" + std::to_string(r.frames.front().timestamp_ms);
    frames_.clear();
    gap_ = 0;
    return r;
  }

  SegmenterConfig cfg_;
  std::vector<Frame> frames_;
  int gap_ = 0;
};

// ---------------------------------------------------------------------------
// Streams with ground truth

struct TruthSpan {
  std::size_t begin = 0, end = 0;  // frame indices [begin, end)
  int label = 0;
  std::string id;
};

struct LabeledStream {
  std::vector<Frame> frames;
  std::vector<TruthSpan> truth;
  double rate_hz = kNominalRateHz;
};

/// Concatenates recordings with `gap` silent frames before each one and after
/// the last. Silent frames carry the sensor noise model (clipped N(0, sigma),
/// deadband, quantized) so the segmenter sees a realistic idle floor.
inline LabeledStream build_stream(std::span<const Recording> gestures, int gap, std::uint64_t seed,
                                  double noise_sigma = 0.02, double noise_floor = 0.05, double quantum = 1e-3) {
  LabeledStream s;
  Rng rng(mix_seed(seed, 0x73747265616dULL));
  auto silent = [&] {
    Frame f;
    for (double& v : f.p) {
      v = std::max(0.0, rng.normal(0.0, noise_sigma));
      if (v < noise_floor) v = 0.0;
      if (quantum > 0.0) v = std::round(v / quantum) * quantum;
    }
    return f;
  };
  auto push = [&](Frame f) {
    f.timestamp_ms = std::llround(static_cast<double>(s.frames.size()) * 1000.0 / s.rate_hz);
    s.frames.push_back(f);
  };
  for (const auto& g : gestures) {
    for (int k = 0; k < gap; ++k) push(silent());
    TruthSpan t;
    t.begin = s.frames.size();
    for (std::size_t i = 0; i < g.true_length(); ++i) push(g.frames[i]);
    t.end = s.frames.size();
    t.label = g.label ? id_of_label(*g.label) : -1;
    t.id = g.id;
    s.truth.push_back(std::move(t));
  }
  for (int k = 0; k < gap; ++k) push(silent());
  return s;
}

struct DetectedSegment {
  std::size_t begin = 0, end = 0;  // stream frame indices [begin, end)
  int predicted = -1;
  double latency_ms = 0.0;
};

struct OnlineReport {
  std::size_t gestures = 0;
  std::size_t segments = 0;
  std::size_t matched = 0;  // gestures overlapped by exactly one segment that overlaps only them
  std::size_t correct = 0;  // matched and correctly classified
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  std::vector<DetectedSegment> detections;

  double match_rate() const { return gestures == 0 ? 0.0 : double(matched) / double(gestures); }
  double accuracy() const { return matched == 0 ? 0.0 : double(correct) / double(matched); }
};

/// Feeds the stream through a segmenter and classifies each emitted segment.
/// Latency is wall time from segment emission to the classifier's answer.
inline OnlineReport stream_evaluate(const LabeledStream& s, const std::function<int(const Recording&)>& classify,
                                    const SegmenterConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  Segmenter seg(cfg);
  OnlineReport rep;
  rep.gestures = s.truth.size();
  auto handle = [&](Recording r, std::size_t end) {
    DetectedSegment d;
    d.end = end;
    d.begin = end - r.frames.size();
    const auto t0 = clock::now();
    d.predicted = classify(r);
    d.latency_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    rep.detections.push_back(d);
  };
  std::size_t trailing = 0;
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    trailing = is_active(s.frames[i], cfg) ? 0 : trailing + 1;
    if (auto r = seg.feed(s.frames[i])) handle(std::move(*r), i + 1 - trailing);
  }
  if (auto r = seg.flush()) handle(std::move(*r), s.frames.size() - trailing);
  rep.segments = rep.detections.size();

  auto overlaps = [](std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) { return a0 < b1 && b0 < a1; };
  for (const auto& t : s.truth) {
    const DetectedSegment* only = nullptr;
    int hits = 0;
    for (const auto& d : rep.detections)
      if (overlaps(t.begin, t.end, d.begin, d.end)) {
        ++hits;
        only = &d;
      }
    if (hits != 1) continue;
    int spans = 0;
    for (const auto& u : s.truth) spans += overlaps(u.begin, u.end, only->begin, only->end);
    if (spans != 1) continue;
    ++rep.matched;
    rep.correct += only->predicted == t.label;
  }
  double sum = 0.0;
  for (const auto& d : rep.detections) {
    sum += d.latency_ms;
    rep.max_latency_ms = std::max(rep.max_latency_ms, d.latency_ms);
  }
  rep.mean_latency_ms = rep.detections.empty() ? 0.0 : sum / double(rep.detections.size());
  return rep;
}

}  // namespace texyz
