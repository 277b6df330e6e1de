#pragma once

#include <cmath>
#include <vector>

#include "texyz/nn/layers.hpp"

namespace texyz::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class S>
class Adam {
 public:
  Adam(std::vector<Param<S>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_), c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const S b1 = S(cfg_.beta1), b2 = S(cfg_.beta2);
    const S lr = S(cfg_.lr / c1), eps = S(cfg_.eps);
    const S inv_c2 = S(1.0 / c2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& g = params_[k]->grad;
      m_[k] = b1 * m_[k] + (S(1) - b1) * g;
      v_[k] = b2 * v_[k] + (S(1) - b2) * g.cwiseProduct(g);
      params_[k]->value.array() -= lr * m_[k].array() / ((v_[k].array() * inv_c2).sqrt() + eps);
    }
  }

  int steps() const { return t_; }

 private:
  std::vector<Param<S>*> params_;
  AdamConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  int t_ = 0;
};

}  // namespace texyz::nn
