#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "texyz/ml/common.hpp"
#include "texyz/rng.hpp"

namespace texyz::ml {

struct RfConfig {
  int n_estimators = 200;
  int max_depth = 9;
  int min_samples_split = 2;
  int features_per_split = 0;  // 0 means floor(sqrt(d))
  std::uint64_t seed = 0;
};

/// Flat CART tree. feature < 0 marks a leaf holding `label`.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left, right, label;

  std::size_t size() const { return feature.size(); }

  int depth(int node = 0) const {
    if (feature[static_cast<std::size_t>(node)] < 0) return 0;
    return 1 + std::max(depth(left[static_cast<std::size_t>(node)]), depth(right[static_cast<std::size_t>(node)]));
  }

  template <class Row>
  int predict(const Row& x) const {
    std::size_t n = 0;
    while (feature[n] >= 0)
      n = static_cast<std::size_t>(x(feature[n]) <= threshold[n] ? left[n] : right[n]);
    return label[n];
  }

  bool operator==(const Tree&) const = default;
};

namespace detail {

using Counts = std::array<int, kNumClasses>;

inline double gini(const Counts& c, int n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (int v : c) s += static_cast<double>(v) * v;
  return 1.0 - s / (static_cast<double>(n) * n);
}

inline int majority(const Counts& c) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k)
    if (c[static_cast<std::size_t>(k)] > c[static_cast<std::size_t>(best)]) best = k;
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<int>& y, const RfConfig& cfg, int mtry, Rng& rng)
      : X_(X), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng), dims_(static_cast<std::size_t>(X.cols())) {
    std::iota(dims_.begin(), dims_.end(), 0);
  }

  Tree build(std::vector<int> samples) {
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  int leaf(const Counts& c) {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.label.push_back(majority(c));
    return static_cast<int>(tree_.size() - 1);
  }

  int grow(std::vector<int>& samples, int depth) {
    Counts total{};
    for (int i : samples) ++total[static_cast<std::size_t>(y_[static_cast<std::size_t>(i)])];
    const int n = static_cast<int>(samples.size());
    const bool pure = std::count(total.begin(), total.end(), 0) == kNumClasses - 1;
    if (pure || depth >= cfg_.max_depth || n < cfg_.min_samples_split) return leaf(total);

    // Partial Fisher-Yates draw of mtry candidate dimensions.
    for (int k = 0; k < mtry_; ++k) {
      const auto j = static_cast<std::size_t>(k) + rng_.below(dims_.size() - static_cast<std::size_t>(k));
      std::swap(dims_[static_cast<std::size_t>(k)], dims_[j]);
    }
    int best_feature = -1;
    double best_threshold = 0.0, best_score = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, int>> col(samples.size());
    for (int k = 0; k < mtry_; ++k) {
      const int f = dims_[static_cast<std::size_t>(k)];
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const int i = samples[s];
        col[s] = {X_(i, f), y_[static_cast<std::size_t>(i)]};
      }
      std::sort(col.begin(), col.end());
      Counts lc{};
      for (int s = 0; s + 1 < n; ++s) {
        ++lc[static_cast<std::size_t>(col[static_cast<std::size_t>(s)].second)];
        const double a = col[static_cast<std::size_t>(s)].first, b = col[static_cast<std::size_t>(s) + 1].first;
        if (a == b) continue;
        Counts rc;
        for (std::size_t c = 0; c < rc.size(); ++c) rc[c] = total[c] - lc[c];
        const int nl = s + 1, nr = n - nl;
        const double score = nl * gini(lc, nl) + nr * gini(rc, nr);
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = a + (b - a) / 2.0;
          // Midpoint can round up onto b for adjacent doubles.
          if (!(best_threshold < b)) best_threshold = a;
        }
      }
    }
    if (best_feature < 0) return leaf(total);

    std::vector<int> lhs, rhs;
    for (int i : samples) (X_(i, best_feature) <= best_threshold ? lhs : rhs).push_back(i);
    const int node = leaf(total);
    const auto nu = static_cast<std::size_t>(node);
    tree_.feature[nu] = best_feature;
    tree_.threshold[nu] = best_threshold;
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(lhs, depth + 1);
    tree_.left[nu] = l;
    const int r = grow(rhs, depth + 1);
    tree_.right[nu] = r;
    return node;
  }

  const Matrix& X_;
  const std::vector<int>& y_;
  const RfConfig& cfg_;
  int mtry_;
  Rng& rng_;
  std::vector<int> dims_;
  Tree tree_;
};

}  // namespace detail

/// Bagged CART forest with Gini splits over a random feature subset per node.
class RandomForest {
 public:
  static RandomForest fit(const Matrix& X, const std::vector<int>& y, const RfConfig& cfg) {
    check_training_set(X, y);
    if (y.size() < 2) throw DomainError("random forest needs at least 2 samples");
    if (cfg.n_estimators < 1 || cfg.max_depth < 1) throw DomainError("invalid forest configuration");
    const int d = static_cast<int>(X.cols());
    const int mtry = std::clamp(cfg.features_per_split > 0 ? cfg.features_per_split
                                                           : static_cast<int>(std::floor(std::sqrt(double(d)))),
                                1, d);
    RandomForest f;
    f.dim_ = X.cols();
    f.cfg_ = cfg;
    const auto n = y.size();
    for (int t = 0; t < cfg.n_estimators; ++t) {
      Rng rng(cfg.seed + static_cast<std::uint64_t>(t));
      std::vector<int> boot(n);
      for (auto& b : boot) b = static_cast<int>(rng.below(n));
      detail::TreeBuilder builder(X, y, cfg, mtry, rng);
      f.trees_.push_back(builder.build(std::move(boot)));
    }
    return f;
  }

  template <class Row>
  int predict(const Row& x) const {
    check_dimension(dim_, x.size());
    detail::Counts votes{};
    for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(x))];
    return detail::majority(votes);
  }

  template <class Row>
  std::array<double, kNumClasses> vote_shares(const Row& x) const {
    check_dimension(dim_, x.size());
    std::array<double, kNumClasses> out{};
    for (const auto& t : trees_) out[static_cast<std::size_t>(t.predict(x))] += 1.0 / static_cast<double>(trees_.size());
    return out;
  }

  std::vector<int> predict(const Matrix& Q) const {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < Q.rows(); ++i) out.push_back(predict(Q.row(i)));
    return out;
  }

  const std::vector<Tree>& trees() const { return trees_; }
  bool operator==(const RandomForest& o) const { return dim_ == o.dim_ && trees_ == o.trees_; }

  void save(ModelEnvelope& m) const {
    m.metadata["n_estimators"] = cfg_.n_estimators;
    m.metadata["max_depth"] = cfg_.max_depth;
    m.metadata["seed"] = cfg_.seed;
    m.metadata["dimension"] = dim_;
    std::vector<double> sizes, feat, thr, left, right, label;
    for (const auto& t : trees_) {
      sizes.push_back(static_cast<double>(t.size()));
      feat.insert(feat.end(), t.feature.begin(), t.feature.end());
      thr.insert(thr.end(), t.threshold.begin(), t.threshold.end());
      left.insert(left.end(), t.left.begin(), t.left.end());
      right.insert(right.end(), t.right.begin(), t.right.end());
      label.insert(label.end(), t.label.begin(), t.label.end());
    }
    const std::size_t total = feat.size(), count = sizes.size();
    m.add("tree_sizes", {count}, std::move(sizes));
    m.add("node_feature", {total}, std::move(feat));
    m.add("node_threshold", {total}, std::move(thr));
    m.add("node_left", {total}, std::move(left));
    m.add("node_right", {total}, std::move(right));
    m.add("node_label", {total}, std::move(label));
  }

  static RandomForest load(const ModelEnvelope& m) {
    RandomForest f;
    f.cfg_.n_estimators = m.metadata.at("n_estimators").get<int>();
    f.cfg_.max_depth = m.metadata.at("max_depth").get<int>();
    f.cfg_.seed = m.metadata.at("seed").get<std::uint64_t>();
    f.dim_ = m.metadata.at("dimension").get<Eigen::Index>();
    const auto& sizes = m.param("tree_sizes").data;
    const auto& feat = m.param("node_feature").data;
    const auto& thr = m.param("node_threshold").data;
    const auto& left = m.param("node_left").data;
    const auto& right = m.param("node_right").data;
    const auto& label = m.param("node_label").data;
    std::size_t at = 0;
    for (double s : sizes) {
      const auto n = static_cast<std::size_t>(s);
      if (at + n > feat.size() || thr.size() != feat.size() || left.size() != feat.size() ||
          right.size() != feat.size() || label.size() != feat.size())
        throw ModelLoadError("forest node blocks are inconsistent");
      Tree t;
      for (std::size_t i = at; i < at + n; ++i) {
        t.feature.push_back(static_cast<int>(feat[i]));
        t.threshold.push_back(thr[i]);
        t.left.push_back(static_cast<int>(left[i]));
        t.right.push_back(static_cast<int>(right[i]));
        t.label.push_back(static_cast<int>(label[i]));
        const bool leaf = t.feature.back() < 0;
        // Children always follow their parent, which also rules out cycles.
        const auto self = static_cast<int>(i - at);
        if ((!leaf && (t.feature.back() >= f.dim_ || t.left.back() <= self || t.right.back() <= self ||
                       std::size_t(t.left.back()) >= n || std::size_t(t.right.back()) >= n)) ||
            t.label.back() < 0 || t.label.back() >= kNumClasses)
          throw ModelLoadError("forest node out of range");
      }
      at += n;
      f.trees_.push_back(std::move(t));
    }
    return f;
  }

 private:
  std::vector<Tree> trees_;
  Eigen::Index dim_ = 0;
  RfConfig cfg_;
};

}  // namespace texyz::ml
