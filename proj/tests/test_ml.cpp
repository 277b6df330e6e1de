#include <catch_amalgamated.hpp>

#include <numeric>

#include "texyz/ml/knn.hpp"
#include "texyz/ml/random_forest.hpp"
#include "texyz/ml/standardizer.hpp"
#include "texyz/ml/svm.hpp"
#include "oracles.hpp"

using namespace texyz;
using namespace texyz::ml;

namespace {

// Two well separated 2D blobs, labels 0 and 1.
void blobs(Rng& rng, int per_class, Matrix& X, std::vector<int>& y) {
  X.resize(2 * per_class, 2);
  y.clear();
  for (int i = 0; i < 2 * per_class; ++i) {
    const int c = i < per_class ? 0 : 1;
    X(i, 0) = (c == 0 ? -4.0 : 4.0) + rng.normal() * 0.7;
    X(i, 1) = rng.normal() * 0.7;
    y.push_back(c);
  }
}

template <class M>
ModelEnvelope saved(const M& m) {
  ModelEnvelope e;
  m.save(e);
  return parse_envelope(dump_envelope(e), {""});
}

}  // namespace

TEST_CASE("standardizer") {
  Rng rng(1);
  Matrix X = oracle::random_matrix(rng, 200, 5, 3.0);
  X.col(2).setConstant(4.5);
  X.col(4) = X.col(4).array() * 1000.0 + 7.0;
  const auto s = Standardizer::fit(X);
  const Matrix Z = s.apply(X);
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double mean = Z.col(j).mean();
    const double sd = std::sqrt((Z.col(j).array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-9);
    if (j == 2)
      CHECK(Z.col(j).cwiseAbs().maxCoeff() == 0.0);
    else
      CHECK(std::abs(sd - 1.0) < 1e-9);
  }
  CHECK(s.scale(2) == 1.0);
  CHECK((s.invert(Z) - X).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK_THROWS_AS(s.apply(Vector(Vector::Zero(4))), SchemaError);

  const auto back = Standardizer::load(saved(s));
  CHECK(back.mean == s.mean);
  CHECK(back.scale == s.scale);
}

TEST_CASE("KNN basics") {
  Matrix X(4, 2);
  X << 0, 0, 1, 0, 0, 1, 5, 5;
  const std::vector<int> y = {2, 2, 7, 7};
  const auto one = Knn::fit(X, y, {1});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(one.predict(Vector(X.row(i).transpose())) == y[std::size_t(i)]);

  // Neighbours of the origin at k=3: (0,0)->2, (1,0)->2, (0,1)->7.
  const auto three = Knn::fit(X, y, {3});
  CHECK(three.predict(Vector(Vector::Zero(2))) == 2);

  // Equal vote counts: class 7 sits closer on average.
  Matrix T(4, 1);
  T << -1.0, 3.0, 0.5, -0.5;
  const auto tie = Knn::fit(T, {1, 1, 4, 4}, {4});
  CHECK(tie.predict(Vector(Vector::Zero(1))) == 4);
  // Exactly equal distances: lowest class id.
  Matrix S(2, 1);
  S << -1.0, 1.0;
  CHECK(Knn::fit(S, {6, 3}, {2}).predict(Vector(Vector::Zero(1))) == 3);

  CHECK_THROWS_AS(Knn::fit(X, y, {5}), DomainError);
  CHECK_THROWS_AS(three.predict(Vector(Vector::Zero(3))), SchemaError);
}

TEST_CASE("KNN matches an exhaustive-scan oracle") {
  Rng rng(5);
  const Matrix X = oracle::random_matrix(rng, 500, 6);
  std::vector<int> y;
  for (int i = 0; i < 500; ++i) y.push_back(rng.range(0, 9));
  const Matrix Q = oracle::random_matrix(rng, 50, 6);
  const auto m = Knn::fit(X, y, {7});
  const auto batch = m.predict(Q);
  for (Eigen::Index q = 0; q < 50; ++q) {
    const Vector x = Q.row(q).transpose();
    const int ref = oracle::knn(X, y, x, 7);
    CHECK(m.predict(x) == ref);
    CHECK(batch[std::size_t(q)] == ref);
  }
}

TEST_CASE("KNN ignores training order") {
  Rng rng(6);
  // Integer grid points produce many exact distance ties.
  Matrix X(120, 3);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 120; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.range(-2, 2);
    y.push_back(rng.range(0, 9));
  }
  const Matrix Q = oracle::random_matrix(rng, 40, 3).array().round().matrix();
  const auto ref = Knn::fit(X, y, {5}).predict(Q);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> perm(120);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Matrix P(120, 3);
    std::vector<int> py;
    for (int i = 0; i < 120; ++i) {
      P.row(i) = X.row(perm[std::size_t(i)]);
      py.push_back(y[std::size_t(perm[std::size_t(i)])]);
    }
    CHECK(Knn::fit(P, py, {5}).predict(Q) == ref);
  }
}

TEST_CASE("random forest") {
  SECTION("single class gives depth-0 trees") {
    Rng rng(7);
    const Matrix X = oracle::random_matrix(rng, 30, 4);
    const auto f = RandomForest::fit(X, std::vector<int>(30, 6), {20, 9, 2, 0, 1});
    for (const auto& t : f.trees()) CHECK(t.depth() == 0);
    for (int p : f.predict(X)) CHECK(p == 6);
  }
  SECTION("XOR is learned") {
    Rng rng(8);
    Matrix X(400, 2);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < 400; ++i) {
      X(i, 0) = rng.uniform(-1, 1);
      X(i, 1) = rng.uniform(-1, 1);
      y.push_back((X(i, 0) > 0) != (X(i, 1) > 0) ? 1 : 0);
    }
    const auto f = RandomForest::fit(X, y, {200, 9, 2, 0, 3});
    const auto p = f.predict(X);
    int hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += p[i] == y[i];
    CHECK(hits / 400.0 >= 0.95);
    for (const auto& t : f.trees()) CHECK(t.depth() <= 9);
  }
  SECTION("same seed, same forest; round-trip keeps predictions") {
    Rng rng(9);
    const Matrix X = oracle::random_matrix(rng, 150, 8);
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) y.push_back(rng.range(0, 9));
    const RfConfig cfg{40, 9, 2, 0, 11};
    const auto a = RandomForest::fit(X, y, cfg), b = RandomForest::fit(X, y, cfg);
    CHECK(a == b);
    const auto c = RandomForest::load(saved(a));
    CHECK(c == a);
    const Matrix Q = oracle::random_matrix(rng, 60, 8);
    CHECK(c.predict(Q) == a.predict(Q));
    CHECK_FALSE(RandomForest::fit(X, y, {40, 9, 2, 0, 12}) == a);
  }
  CHECK_THROWS_AS(RandomForest::fit(Matrix::Zero(1, 2), {0}, {}), DomainError);
}

TEST_CASE("SVM separates blobs and honours the optimizer contract") {
  Rng rng(10);
  Matrix X;
  std::vector<int> y;
  blobs(rng, 40, X, y);
  SvmConfig cfg;
  cfg.C = 128.0;
  cfg.gamma = 1.0 / 2048.0;
  const auto m = Svm::fit(X, y, cfg);
  CHECK(m.predict(X) == y);

  // Dual feasibility and KKT on the raw solver.
  std::vector<double> yy;
  for (int c : y) yy.push_back(c == 0 ? 1.0 : -1.0);
  const Matrix K = rbf_gram(X, X, cfg.gamma);
  const auto s = smo_solve(K, yy, cfg);
  CHECK(s.converged);
  double balance = 0;
  for (std::size_t i = 0; i < yy.size(); ++i) {
    CHECK(s.alpha[i] >= 0.0);
    CHECK(s.alpha[i] <= cfg.C);
    balance += s.alpha[i] * yy[i];
  }
  CHECK(std::abs(balance) <= 1e-9);
  CHECK(kkt_residual(K, yy, s, cfg.C) <= cfg.tol);
}

TEST_CASE("SVM decision values match a direct kernel sum") {
  Rng rng(11);
  const Matrix X = oracle::random_matrix(rng, 90, 4);
  std::vector<int> y;
  for (int i = 0; i < 90; ++i) y.push_back(i % 3 == 0 ? 1 : (X(i, 0) > 0 ? 4 : 8));
  SvmConfig cfg;
  cfg.C = 4.0;
  cfg.gamma = 0.3;
  const auto m = Svm::fit(X, y, cfg);
  const Matrix& sv = m.support_vectors();
  for (int q = 0; q < 20; ++q) {
    Vector x(4);
    for (auto& v : x) v = rng.normal();
    for (std::size_t k = 0; k < m.machines().size(); ++k) {
      const auto& bm = m.machines()[k];
      if (bm.constant) continue;
      const double ref = oracle::rbf_decision(sv, bm.coef, bm.b, cfg.gamma, x);
      CHECK(std::abs(m.decision(k, x) - ref) <= 1e-9);
    }
  }
  // Missing classes leave constant machines; 45 machines regardless.
  CHECK(m.machines().size() == 45);
  int constant = 0;
  for (const auto& bm : m.machines()) constant += bm.constant;
  CHECK(constant == 45 - 3);

  const auto back = Svm::load(saved(m));
  const Matrix Q = oracle::random_matrix(rng, 30, 4);
  CHECK(back.predict(Q) == m.predict(Q));
  CHECK_THROWS_AS(Svm::fit(X, std::vector<int>(90, 2), cfg), DomainError);
}

TEST_CASE("duplicating a non-support vector leaves the SVM unchanged") {
  Rng rng(12);
  Matrix X;
  std::vector<int> y;
  blobs(rng, 25, X, y);
  SvmConfig cfg;
  cfg.C = 10.0;
  cfg.gamma = 0.05;
  cfg.tol = 1e-8;
  const auto m = Svm::fit(X, y, cfg);
  // Any training point absent from the support-vector pool has alpha = 0.
  Eigen::Index far = -1;
  for (Eigen::Index i = 0; i < X.rows() && far < 0; ++i) {
    bool sv = false;
    for (Eigen::Index k = 0; k < m.support_vectors().rows(); ++k) sv = sv || m.support_vectors().row(k) == X.row(i);
    if (!sv) far = i;
  }
  REQUIRE(far >= 0);
  Matrix Xd(X.rows() + 2, 2);
  Xd << X, X.row(far), X.row(far);
  auto yd = y;
  yd.push_back(y[std::size_t(far)]);
  yd.push_back(y[std::size_t(far)]);
  const auto d = Svm::fit(Xd, yd, cfg);
  for (int q = 0; q < 30; ++q) {
    Vector x(2);
    x << rng.uniform(-6, 6), rng.uniform(-3, 3);
    CHECK(std::abs(m.decision(0, x) - d.decision(0, x)) <= 1e-5);
  }
}

TEST_CASE("every classifier fits a two-point set") {
  Matrix X(2, 3);
  X << 0, 1, 2, 3, 1, 0;
  const std::vector<int> y = {5, 9};
  CHECK(Knn::fit(X, y, {1}).predict(X) == y);
  CHECK(RandomForest::fit(X, y, {50, 9, 2, 0, 1}).predict(X) == y);
  CHECK(Svm::fit(X, y, {}).predict(X) == y);
}
