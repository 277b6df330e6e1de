#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "texyz/ml/common.hpp"

namespace texyz::ml {

struct SvmConfig {
  double C = 512.0;
  double gamma = 1.0 / 8192.0;
  double tol = 1e-3;
  // Step cap per binary machine, in multiples of its training-set size.
  int max_sweeps = 200;
};

/// RBF Gram matrix between the rows of A and B.
inline Vector y_vec(const std::vector<double>& y) {
  return Eigen::Map<const Vector>(y.data(), Eigen::Index(y.size()));
}

inline Matrix rbf_gram(const Matrix& A, const Matrix& B, double gamma) {
  const Vector na = A.rowwise().squaredNorm(), nb = B.rowwise().squaredNorm();
  Matrix G = -2.0 * (A * B.transpose());
  G.colwise() += na;
  G.rowwise() += nb.transpose();
  return (-gamma * G.array().max(0.0)).exp().matrix();
}

struct SmoResult {
  std::vector<double> alpha;
  double b = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// SMO on a precomputed kernel with labels +1/-1. Each step updates the
/// pair chosen by maximal violation (first index) and second-order gain
/// (second index); it stops once the largest KKT violation pair differs by
/// at most tol, or after max_sweeps * n steps.
inline SmoResult smo_solve(const Matrix& K, const std::vector<double>& y, const SvmConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(y.size());
  SmoResult res;
  res.alpha.assign(y.size(), 0.0);
  auto& a = res.alpha;
  const double C = cfg.C;
  constexpr double kTau = 1e-12;
  // Gradient of the dual objective 1/2 a'Qa - e'a with Q = yy' .* K.
  Vector grad = Vector::Constant(n, -1.0);
  const Vector yv = y_vec(y);
  const long cap = static_cast<long>(cfg.max_sweeps) * std::max<long>(1, static_cast<long>(n));
  auto up = [&](Eigen::Index t) { return y[std::size_t(t)] > 0 ? a[std::size_t(t)] < C : a[std::size_t(t)] > 0.0; };
  auto low = [&](Eigen::Index t) { return y[std::size_t(t)] > 0 ? a[std::size_t(t)] > 0.0 : a[std::size_t(t)] < C; };

  while (res.iterations < cap) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t)
      if (up(t) && -y[std::size_t(t)] * grad(t) >= gmax) {
        gmax = -y[std::size_t(t)] * grad(t);
        i = t;
      }
    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity(), best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!low(t)) continue;
      const double v = -y[std::size_t(t)] * grad(t);
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double diff = gmax - v;
        double curv = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (curv <= 0.0) curv = kTau;
        const double gain = -(diff * diff) / curv;
        if (gain < best) {
          best = gain;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin <= cfg.tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const auto iu = std::size_t(i), ju = std::size_t(j);
    const double yi = y[iu], yj = y[ju];
    const double ai = a[iu], aj = a[ju];
    double curv = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (curv <= 0.0) curv = kTau;
    double ni, nj;
    if (yi != yj) {
      const double delta = (-grad(i) - grad(j)) / curv, diff = ai - aj;
      ni = ai + delta;
      nj = aj + delta;
      if (diff > 0.0 && nj < 0.0) { nj = 0.0; ni = diff; }
      else if (diff <= 0.0 && ni < 0.0) { ni = 0.0; nj = -diff; }
      if (diff > 0.0 && ni > C) { ni = C; nj = C - diff; }
      else if (diff <= 0.0 && nj > C) { nj = C; ni = C + diff; }
    } else {
      const double delta = (grad(i) - grad(j)) / curv, sum = ai + aj;
      ni = ai - delta;
      nj = aj + delta;
      if (sum > C && ni > C) { ni = C; nj = sum - C; }
      else if (sum <= C && nj < 0.0) { nj = 0.0; ni = sum; }
      if (sum > C && nj > C) { nj = C; ni = sum - C; }
      else if (sum <= C && ni < 0.0) { ni = 0.0; nj = sum; }
    }
    a[iu] = ni;
    a[ju] = nj;
    // grad_t += Q_ti dai + Q_tj daj
    grad.array() += (yi * (ni - ai)) * (yv.array() * K.col(i).array()) +
                    (yj * (nj - aj)) * (yv.array() * K.col(j).array());
  }

  // Offset from free vectors, else the midpoint of the feasible interval.
  double sum = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto tu = std::size_t(t);
    const double yg = y[tu] * grad(t);
    if (a[tu] > 0.0 && a[tu] < C) {
      sum += yg;
      ++free;
    } else if ((a[tu] >= C && y[tu] < 0) || (a[tu] <= 0.0 && y[tu] > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  const double rho = free > 0 ? sum / free : (std::isfinite(ub) && std::isfinite(lb) ? 0.5 * (ub + lb) : 0.0);
  res.b = -rho;
  return res;
}

/// Largest violation of the box-constrained KKT conditions, measured on the
/// margin y*f(x) - 1.
inline double kkt_residual(const Matrix& K, const std::vector<double>& y, const SmoResult& s, double C) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    double f = s.b;
    for (Eigen::Index k = 0; k < K.rows(); ++k) f += s.alpha[std::size_t(k)] * y[std::size_t(k)] * K(k, i);
    const double m = y[std::size_t(i)] * f - 1.0;
    const double a = s.alpha[std::size_t(i)];
    double v = 0.0;
    if (a <= 0.0)
      v = std::max(0.0, -m);
    else if (a >= C)
      v = std::max(0.0, m);
    else
      v = std::abs(m);
    worst = std::max(worst, v);
  }
  return worst;
}

/// One-vs-one machine between classes pos (+1) and neg (-1). Coefficients
/// are alpha*y over the shared support-vector pool.
struct BinaryMachine {
  int pos = 0, neg = 1;
  bool constant = false;  // one side had no samples
  int constant_label = -1;
  double b = 0.0;
  Vector coef;
  int iterations = 0;
  bool converged = true;
};

class Svm {
 public:
  static Svm fit(const Matrix& X, const std::vector<int>& y, const SvmConfig& cfg) {
    check_training_set(X, y);
    if (!(cfg.C > 0.0) || !(cfg.gamma > 0.0)) throw DomainError("SVM needs C > 0 and gamma > 0");
    std::array<std::vector<Eigen::Index>, kNumClasses> members;
    for (std::size_t i = 0; i < y.size(); ++i) members[std::size_t(y[i])].push_back(Eigen::Index(i));
    int present = 0;
    for (const auto& m : members) present += m.empty() ? 0 : 1;
    if (present < 2) throw DomainError("SVM needs at least 2 classes present");

    // Kernel blocks between classes are computed once and shared by pairs.
    std::array<Matrix, kNumClasses> rows;
    for (int c = 0; c < kNumClasses; ++c) rows[std::size_t(c)] = X(members[std::size_t(c)], Eigen::all);

    Svm m;
    m.gamma_ = cfg.gamma;
    m.dim_ = X.cols();
    std::map<Eigen::Index, Eigen::Index> pool_slot;
    std::vector<std::vector<std::pair<Eigen::Index, double>>> sparse;
    for (int p = 0; p < kNumClasses; ++p)
      for (int q = p + 1; q < kNumClasses; ++q) {
        BinaryMachine bm;
        bm.pos = p;
        bm.neg = q;
        const auto& A = members[std::size_t(p)];
        const auto& B = members[std::size_t(q)];
        std::vector<std::pair<Eigen::Index, double>> sv;
        if (A.empty() || B.empty()) {
          bm.constant = true;
          bm.constant_label = A.empty() ? (B.empty() ? -1 : q) : p;
        } else {
          const auto na = Eigen::Index(A.size()), nb = Eigen::Index(B.size());
          Matrix K(na + nb, na + nb);
          K.topLeftCorner(na, na) = rbf_gram(rows[std::size_t(p)], rows[std::size_t(p)], cfg.gamma);
          K.bottomRightCorner(nb, nb) = rbf_gram(rows[std::size_t(q)], rows[std::size_t(q)], cfg.gamma);
          K.topRightCorner(na, nb) = rbf_gram(rows[std::size_t(p)], rows[std::size_t(q)], cfg.gamma);
          K.bottomLeftCorner(nb, na) = K.topRightCorner(na, nb).transpose();
          std::vector<double> yy(std::size_t(na + nb), -1.0);
          std::fill(yy.begin(), yy.begin() + na, 1.0);
          const auto s = smo_solve(K, yy, cfg);
          bm.b = s.b;
          bm.iterations = s.iterations;
          bm.converged = s.converged;
          for (Eigen::Index k = 0; k < na + nb; ++k)
            if (s.alpha[std::size_t(k)] > 0.0)
              sv.emplace_back(k < na ? A[std::size_t(k)] : B[std::size_t(k - na)],
                              s.alpha[std::size_t(k)] * yy[std::size_t(k)]);
        }
        for (const auto& [idx, c] : sv) pool_slot.emplace(idx, 0);
        sparse.push_back(std::move(sv));
        m.machines_.push_back(std::move(bm));
      }
    Eigen::Index slot = 0;
    std::vector<Eigen::Index> pool_rows;
    for (auto& [idx, s] : pool_slot) {
      s = slot++;
      pool_rows.push_back(idx);
    }
    m.pool_ = X(pool_rows, Eigen::all);
    for (std::size_t k = 0; k < m.machines_.size(); ++k) {
      m.machines_[k].coef = Vector::Zero(slot);
      for (const auto& [idx, c] : sparse[k]) m.machines_[k].coef(pool_slot.at(idx)) = c;
    }
    return m;
  }

  /// Kernel values between x and every pooled support vector.
  Vector kernel_row(const Vector& x) const {
    check_dimension(dim_, x.size());
    return (-gamma_ * (pool_.rowwise() - x.transpose()).rowwise().squaredNorm().array()).exp().matrix();
  }

  /// Binary decision value of machine k (positive favours machines()[k].pos).
  double decision(std::size_t k, const Vector& x) const { return value(k, kernel_row(x)); }

  int predict(const Vector& x) const { return vote(kernel_row(x)); }

  /// One-vs-one votes normalized to sum to one.
  std::array<double, kNumClasses> vote_shares(const Vector& x) const {
    const Vector kr = kernel_row(x);
    std::array<double, kNumClasses> out{};
    double n = 0.0;
    for (std::size_t k = 0; k < machines_.size(); ++k) {
      const auto& bm = machines_[k];
      const int winner = bm.constant ? bm.constant_label : (value(k, kr) > 0.0 ? bm.pos : bm.neg);
      if (winner < 0) continue;
      out[std::size_t(winner)] += 1.0;
      n += 1.0;
    }
    if (n > 0.0)
      for (double& v : out) v /= n;
    return out;
  }

  std::vector<int> predict(const Matrix& Q) const {
    check_dimension(dim_, Q.cols());
    if (Q.rows() == 0) return {};
    const Matrix G = rbf_gram(Q, pool_, gamma_);
    std::vector<int> out;
    for (Eigen::Index i = 0; i < Q.rows(); ++i) out.push_back(vote(G.row(i).transpose()));
    return out;
  }

  const std::vector<BinaryMachine>& machines() const { return machines_; }
  const Matrix& support_vectors() const { return pool_; }
  double gamma() const { return gamma_; }

  void save(ModelEnvelope& m) const {
    m.metadata["gamma"] = gamma_;
    m.metadata["dimension"] = dim_;
    m.add("support_vectors", shape_of(pool_), to_std(pool_));
    std::vector<double> head, coef;
    for (const auto& bm : machines_) {
      head.insert(head.end(), {double(bm.pos), double(bm.neg), bm.constant ? 1.0 : 0.0, double(bm.constant_label), bm.b});
      coef.insert(coef.end(), bm.coef.data(), bm.coef.data() + bm.coef.size());
    }
    m.add("machines", {machines_.size(), 5}, std::move(head));
    m.add("coefficients", {machines_.size(), std::size_t(pool_.rows())}, std::move(coef));
  }

  static Svm load(const ModelEnvelope& m) {
    Svm s;
    s.gamma_ = m.metadata.at("gamma").get<double>();
    s.dim_ = m.metadata.at("dimension").get<Eigen::Index>();
    s.pool_ = matrix_from(m.param("support_vectors"));
    if (s.pool_.rows() > 0 && s.pool_.cols() != s.dim_) throw ModelLoadError("support vector dimension mismatch");
    const auto& head = m.param("machines");
    const auto& coef = m.param("coefficients");
    if (head.shape.size() != 2 || head.shape[1] != 5) throw ModelLoadError("bad machine table");
    const auto nm = head.shape[0];
    const auto nsv = std::size_t(s.pool_.rows());
    if (coef.data.size() != nm * nsv) throw ModelLoadError("coefficient block size mismatch");
    for (std::size_t k = 0; k < nm; ++k) {
      BinaryMachine bm;
      bm.pos = int(head.data[5 * k]);
      bm.neg = int(head.data[5 * k + 1]);
      bm.constant = head.data[5 * k + 2] != 0.0;
      bm.constant_label = int(head.data[5 * k + 3]);
      bm.b = head.data[5 * k + 4];
      if (bm.pos < 0 || bm.pos >= kNumClasses || bm.neg < 0 || bm.neg >= kNumClasses)
        throw ModelLoadError("machine class out of range");
      bm.coef = Eigen::Map<const Vector>(coef.data.data() + k * nsv, Eigen::Index(nsv));
      s.machines_.push_back(std::move(bm));
    }
    return s;
  }

 private:
  double value(std::size_t k, const Vector& kr) const { return machines_[k].coef.dot(kr) + machines_[k].b; }

  // Majority vote; ties go to the largest summed oriented decision value,
  // then the lowest class id.
  int vote(const Vector& kr) const {
    std::array<int, kNumClasses> votes{};
    std::array<double, kNumClasses> margin{};
    for (std::size_t k = 0; k < machines_.size(); ++k) {
      const auto& bm = machines_[k];
      if (bm.constant) {
        if (bm.constant_label >= 0) ++votes[std::size_t(bm.constant_label)];
        continue;
      }
      const double f = value(k, kr);
      ++votes[std::size_t(f > 0.0 ? bm.pos : bm.neg)];
      margin[std::size_t(bm.pos)] += f;
      margin[std::size_t(bm.neg)] -= f;
    }
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      const auto i = std::size_t(c), b = std::size_t(best);
      if (votes[i] > votes[b] || (votes[i] == votes[b] && margin[i] > margin[b])) best = c;
    }
    return best;
  }

  Matrix pool_;
  std::vector<BinaryMachine> machines_;
  double gamma_ = 1.0;
  Eigen::Index dim_ = 0;
};

}  // namespace texyz::ml
