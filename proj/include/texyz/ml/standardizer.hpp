#pragma once

#include <cmath>

#include "texyz/ml/common.hpp"

namespace texyz::ml {

inline constexpr double kMinStd = 1e-12;

/// Per-dimension z-scoring. Dimensions with (near-)zero spread are only
/// centered.
struct Standardizer {
  Vector mean;
  Vector scale;  // divisor, 1 for degenerate dimensions

  static Standardizer fit(const Matrix& X) {
    if (X.rows() == 0) throw DomainError("cannot standardize an empty set");
    Standardizer s;
    s.mean = X.colwise().mean().transpose();
    s.scale = Vector::Ones(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double sd = std::sqrt((X.col(j).array() - s.mean(j)).square().mean());
      if (sd >= kMinStd) s.scale(j) = sd;
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    check_dimension(mean.size(), X.cols());
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }

  Vector apply(const Vector& x) const {
    check_dimension(mean.size(), x.size());
    return (x - mean).cwiseQuotient(scale);
  }

  Matrix invert(const Matrix& Z) const {
    return (Z.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array();
  }

  void save(ModelEnvelope& m) const {
    const auto d = static_cast<std::size_t>(mean.size());
    m.add("std_mean", {d}, {mean.data(), mean.data() + mean.size()});
    m.add("std_scale", {d}, {scale.data(), scale.data() + scale.size()});
  }

  static Standardizer load(const ModelEnvelope& m) {
    const auto& a = m.param("std_mean");
    const auto& b = m.param("std_scale");
    if (a.data.size() != b.data.size()) throw ModelLoadError("standardizer blocks differ in size");
    Standardizer s;
    s.mean = Eigen::Map<const Vector>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
    s.scale = Eigen::Map<const Vector>(b.data.data(), static_cast<Eigen::Index>(b.data.size()));
    return s;
  }
};

}  // namespace texyz::ml
