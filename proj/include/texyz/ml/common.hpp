#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/model_file.hpp"

namespace texyz::ml {

// Samples are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline void check_training_set(const Matrix& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw DomainError("sample and label counts differ");
  for (int label : y)
    if (label < 0 || label >= kNumClasses) throw DomainError("label out of range: " + std::to_string(label));
}

inline void check_dimension(Eigen::Index expected, Eigen::Index got) {
  if (expected != got)
    throw SchemaError("feature dimension " + std::to_string(got) + " does not match model dimension " +
                      std::to_string(expected));
}

inline std::vector<double> to_std(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

inline Matrix matrix_from(const ParamBlock& b) {
  if (b.shape.size() != 2) throw ModelLoadError("parameter '" + b.name + "' is not a matrix");
  Matrix m(static_cast<Eigen::Index>(b.shape[0]), static_cast<Eigen::Index>(b.shape[1]));
  std::copy(b.data.begin(), b.data.end(), m.data());
  return m;
}

inline std::vector<std::size_t> shape_of(const Matrix& m) {
  return {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
}

}  // namespace texyz::ml
