#pragma once

#include <algorithm>
#include <array>
#include <limits>

#include "texyz/ml/common.hpp"

namespace texyz::ml {

struct KnnConfig {
  int k = 7;
};

/// Exhaustive Euclidean K-nearest-neighbour vote.
class Knn {
 public:
  Knn() = default;

  static Knn fit(Matrix X, std::vector<int> y, KnnConfig cfg) {
    check_training_set(X, y);
    if (cfg.k < 1) throw DomainError("k must be at least 1");
    if (static_cast<std::size_t>(cfg.k) > y.size())
      throw DomainError("k=" + std::to_string(cfg.k) + " exceeds the " + std::to_string(y.size()) + " training samples");
    Knn m;
    m.X_ = std::move(X);
    m.y_ = std::move(y);
    m.k_ = cfg.k;
    m.norms_ = m.X_.rowwise().squaredNorm();
    return m;
  }

  int k() const { return k_; }
  Eigen::Index dimension() const { return X_.cols(); }
  std::size_t size() const { return y_.size(); }

  int predict(const Vector& x) const {
    check_dimension(X_.cols(), x.size());
    const Vector d2 = (X_.rowwise() - x.transpose()).rowwise().squaredNorm();
    return vote(d2);
  }

  /// Fraction of the k nearest neighbours in each class.
  std::array<double, kNumClasses> vote_shares(const Vector& x) const {
    check_dimension(X_.cols(), x.size());
    const Vector d2 = (X_.rowwise() - x.transpose()).rowwise().squaredNorm();
    std::vector<std::pair<double, int>> cand(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i) cand[i] = {d2(static_cast<Eigen::Index>(i)), y_[i]};
    std::partial_sort(cand.begin(), cand.begin() + k_, cand.end());
    std::array<double, kNumClasses> out{};
    for (int i = 0; i < k_; ++i) out[static_cast<std::size_t>(cand[static_cast<std::size_t>(i)].second)] += 1.0 / k_;
    return out;
  }

  std::vector<int> predict(const Matrix& Q) const {
    check_dimension(X_.cols(), Q.cols());
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(Q.rows()));
    // Batched squared distances; the exact per-row difference is recomputed
    // for candidate neighbours so ranking does not suffer from cancellation.
    const Matrix cross = Q * X_.transpose();
    for (Eigen::Index q = 0; q < Q.rows(); ++q) {
      Vector approx = (norms_ - 2.0 * cross.row(q).transpose()).array() + Q.row(q).squaredNorm();
      out.push_back(vote_refined(approx, Q.row(q).transpose()));
    }
    return out;
  }

  void save(ModelEnvelope& m) const {
    m.metadata["k"] = k_;
    m.add("train_x", shape_of(X_), to_std(X_));
    m.add("train_y", {y_.size()}, {y_.begin(), y_.end()});
  }

  static Knn load(const ModelEnvelope& m) {
    const auto& yb = m.param("train_y");
    std::vector<int> y;
    for (double v : yb.data) y.push_back(static_cast<int>(v));
    return fit(matrix_from(m.param("train_x")), std::move(y), {m.metadata.at("k").get<int>()});
  }

 private:
  int vote(const Vector& d2) const {
    std::vector<std::pair<double, int>> cand(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i) cand[i] = {d2(static_cast<Eigen::Index>(i)), y_[i]};
    return decide(cand);
  }

  int vote_refined(const Vector& approx, const Vector& x) const {
    // Keep a generous shortlist by approximate distance, then rank exactly.
    const std::size_t n = y_.size();
    const std::size_t keep = std::min(n, static_cast<std::size_t>(k_) * 4 + 16);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) { return approx(Eigen::Index(a)) < approx(Eigen::Index(b)); });
    const double cutoff = approx(static_cast<Eigen::Index>(idx[keep - 1]));
    std::vector<std::pair<double, int>> cand;
    // Anything within rounding distance of the cutoff could still belong.
    const double slack = 1e-9 * (1.0 + std::abs(cutoff));
    for (std::size_t i = 0; i < n; ++i)
      if (approx(static_cast<Eigen::Index>(i)) <= cutoff + slack)
        cand.emplace_back((X_.row(static_cast<Eigen::Index>(i)) - x.transpose()).squaredNorm(), y_[i]);
    return decide(cand);
  }

  // Majority among the k nearest by (distance, label); ties go to the
  // smallest mean distance, then the lowest class id.
  int decide(std::vector<std::pair<double, int>>& cand) const {
    const auto k = static_cast<std::ptrdiff_t>(k_);
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::array<int, kNumClasses> count{};
    std::array<double, kNumClasses> dist{};
    for (std::ptrdiff_t i = 0; i < k; ++i) {
      const auto c = static_cast<std::size_t>(cand[static_cast<std::size_t>(i)].second);
      ++count[c];
      dist[c] += std::sqrt(cand[static_cast<std::size_t>(i)].first);
    }
    int best = -1;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto i = static_cast<std::size_t>(c);
      if (count[i] == 0) continue;
      if (best < 0) {
        best = c;
        continue;
      }
      const auto b = static_cast<std::size_t>(best);
      if (count[i] > count[b] || (count[i] == count[b] && dist[i] / count[i] < dist[b] / count[b])) best = c;
    }
    return best;
  }

  Matrix X_;
  std::vector<int> y_;
  Vector norms_;
  int k_ = 1;
};

}  // namespace texyz::ml
