#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "texyz/features.hpp"
#include "texyz/model_file.hpp"
#include "texyz/nn/layers.hpp"

namespace texyz::nn {

enum class Arch { cnn_mhi, lstm, cnn_lstm };

inline std::string_view name_of(Arch a) {
  switch (a) {
    case Arch::cnn_mhi: return "cnn_mhi";
    case Arch::lstm: return "lstm";
    case Arch::cnn_lstm: return "cnn_lstm";
  }
  return "cnn_mhi";
}

inline Arch arch_from_name(std::string_view n) {
  if (n == "cnn_mhi") return Arch::cnn_mhi;
  if (n == "lstm") return Arch::lstm;
  if (n == "cnn_lstm") return Arch::cnn_lstm;
  throw SchemaError("unknown network architecture: " + std::string(n));
}

inline bool is_sequence(Arch a) { return a != Arch::cnn_mhi; }

inline constexpr std::size_t kCnnMhiParams = 181738;
inline constexpr std::size_t kLstmParams = 14922;
inline constexpr std::size_t kCnnLstmParams = 38570;

inline constexpr int kHidden = 32;

/// One network input: length frames of 81 values (an MHI is one frame).
template <class S>
struct Sample {
  std::vector<S> values;
  int length = 1;
  int label = -1;
};

template <class S>
Sample<S> mhi_input(const Recording& r) {
  const Mhi h = mhi(r);
  Sample<S> s;
  s.values.assign(h.begin(), h.end());
  if (r.label) s.label = id_of_label(*r.label);
  return s;
}

template <class S>
Sample<S> sequence_input(const Recording& r) {
  Sample<S> s;
  s.length = static_cast<int>(r.true_length());
  if (s.length == 0) throw DomainError("sequence input of an empty recording");
  s.values.reserve(std::size_t(s.length) * kTaxels);
  for (int t = 0; t < s.length; ++t)
    for (double v : r.frames[std::size_t(t)].p) s.values.push_back(static_cast<S>(v));
  if (r.label) s.label = id_of_label(*r.label);
  return s;
}

/// Time-major batch: column t*N + n holds frame t of sequence n; sequences
/// shorter than the longest are zero-padded.
template <class S>
struct Batch {
  Mat<S> x;
  std::vector<int> lengths;
  std::vector<int> labels;
  Eigen::Index size() const { return Eigen::Index(lengths.size()); }
};

template <class S, class It>
Batch<S> make_batch(It first, It last, Eigen::Index pad_to = 0) {
  Batch<S> b;
  int T = static_cast<int>(pad_to);
  for (It it = first; it != last; ++it) {
    const auto& s = **it;
    if (s.values.size() != std::size_t(s.length) * kTaxels)
      throw SchemaError("input has " + std::to_string(s.values.size()) + " values for " + std::to_string(s.length) +
                        " frames");
    b.lengths.push_back(s.length);
    b.labels.push_back(s.label);
    T = std::max(T, s.length);
  }
  const auto N = Eigen::Index(b.lengths.size());
  b.x = Mat<S>::Zero(kTaxels, Eigen::Index(T) * N);
  Eigen::Index n = 0;
  for (It it = first; it != last; ++it, ++n) {
    const auto& s = **it;
    for (int t = 0; t < s.length; ++t)
      for (int p = 0; p < kTaxels; ++p)
        b.x(p, t * N + n) = static_cast<S>(s.values[std::size_t(t * kTaxels + p)]);
  }
  return b;
}

template <class S>
Batch<S> make_batch(const std::vector<const Sample<S>*>& samples, Eigen::Index pad_to = 0) {
  return make_batch<S>(samples.begin(), samples.end(), pad_to);
}

template <class S>
Batch<S> make_batch(const Sample<S>& s, Eigen::Index pad_to = 0) {
  std::vector<const Sample<S>*> one{&s};
  return make_batch<S>(one, pad_to);
}

template <class S>
class Network {
 public:
  Network() = default;

  Network(Arch arch, std::uint64_t seed) : arch_(arch) {
    Rng rng(seed);
    switch (arch) {
      case Arch::cnn_mhi:
        conv_[0].init("conv1", 1, 8, rng);
        conv_[1].init("conv2", 8, 16, rng);
        conv_[2].init("conv3", 16, 32, rng);
        conv_[3].init("conv4", 32, 32, rng);
        fc1_.init("fc1", 32 * kPixels, 64, rng);
        out_.init("out", 64, kNumClasses, rng);
        break;
      case Arch::lstm:
        lstm_.init("lstm", kTaxels, kHidden, rng);
        out_.init("out", kHidden, kNumClasses, rng);
        break;
      case Arch::cnn_lstm:
        conv_[0].init("conv1", 1, 8, rng);
        conv_[1].init("conv2", 8, 16, rng);
        lstm_.init("lstm", 16 * MaxPool2<S>::kOut * MaxPool2<S>::kOut, kHidden, rng);
        out_.init("out", kHidden, kNumClasses, rng);
        for (auto& a : act_) a.slope = S(0);
        break;
    }
  }

  Arch arch() const { return arch_; }

  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> p;
    const int convs = arch_ == Arch::cnn_mhi ? 4 : arch_ == Arch::cnn_lstm ? 2 : 0;
    for (int i = 0; i < convs; ++i) {
      p.push_back(&conv_[std::size_t(i)].W);
      p.push_back(&conv_[std::size_t(i)].b);
    }
    if (arch_ == Arch::cnn_mhi) {
      p.push_back(&fc1_.W);
      p.push_back(&fc1_.b);
    } else {
      p.push_back(&lstm_.Wx);
      p.push_back(&lstm_.Wh);
      p.push_back(&lstm_.b);
    }
    p.push_back(&out_.W);
    p.push_back(&out_.b);
    return p;
  }

  std::vector<const Param<S>*> params() const {
    std::vector<const Param<S>*> out;
    for (auto* p : const_cast<Network*>(this)->params()) out.push_back(p);
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += std::size_t(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }

  void corrupt_conv_backward(bool on) {
    for (auto& c : conv_) c.corrupt_backward = on;
  }

  /// Logits, one column per sample.
  Mat<S> forward(const Batch<S>& b) {
    const Eigen::Index N = b.size();
    if (b.x.rows() != kTaxels) throw SchemaError("network input must have 81 rows");
    if (N == 0) throw DomainError("empty batch");
    for (int len : b.lengths)
      if (len < 1 || Eigen::Index(len) * N > b.x.cols()) throw SchemaError("true length exceeds padded length");
    switch (arch_) {
      case Arch::cnn_mhi: {
        if (b.x.cols() != N) throw SchemaError("MHI network expects one frame per sample");
        Mat<S> a = Eigen::Map<const Mat<S>>(b.x.data(), 1, N * kPixels);
        for (std::size_t i = 0; i < 4; ++i) a = act_[i].forward(conv_[i].forward(a));
        const Mat<S> flat = Eigen::Map<const Mat<S>>(a.data(), 32 * kPixels, N);
        return out_.forward(act_[4].forward(fc1_.forward(flat)));
      }
      case Arch::lstm:
        return out_.forward(lstm_.forward(b.x, b.lengths));
      case Arch::cnn_lstm: {
        const Eigen::Index F = b.x.cols();
        Mat<S> a = Eigen::Map<const Mat<S>>(b.x.data(), 1, F * kPixels);
        a = act_[0].forward(conv_[0].forward(a));
        a = act_[1].forward(conv_[1].forward(a));
        a = pool_.forward(a);
        constexpr int kCells = MaxPool2<S>::kOut * MaxPool2<S>::kOut;
        const Mat<S> seq = Eigen::Map<const Mat<S>>(a.data(), 16 * kCells, F);
        return out_.forward(lstm_.forward(seq, b.lengths));
      }
    }
    return {};
  }

  /// Accumulates parameter gradients for dL/dlogits.
  void backward(const Mat<S>& dlogits) {
    Mat<S> d = out_.backward(dlogits);
    switch (arch_) {
      case Arch::cnn_mhi: {
        d = fc1_.backward(act_[4].backward(d));
        Mat<S> g = Eigen::Map<const Mat<S>>(d.data(), 32, d.cols() * kPixels);
        for (int i = 3; i >= 0; --i) g = conv_[std::size_t(i)].backward(act_[std::size_t(i)].backward(g));
        break;
      }
      case Arch::lstm:
        lstm_.backward(d);
        break;
      case Arch::cnn_lstm: {
        d = lstm_.backward(d);
        constexpr int kCells = MaxPool2<S>::kOut * MaxPool2<S>::kOut;
        Mat<S> g = Eigen::Map<const Mat<S>>(d.data(), 16, d.cols() * kCells);
        g = pool_.backward(g);
        g = conv_[1].backward(act_[1].backward(g));
        conv_[0].backward(act_[0].backward(g));
        break;
      }
    }
  }

  /// Mean softmax cross-entropy over the batch; with `grad`, also fills
  /// parameter gradients (zeroed first).
  S loss(const Batch<S>& b, bool grad) {
    const Mat<S> logits = forward(b);
    const Eigen::Index N = logits.cols();
    Mat<S> d(logits.rows(), N);
    S total = 0;
    for (Eigen::Index n = 0; n < N; ++n) {
      const int y = b.labels[std::size_t(n)];
      if (y < 0 || y >= kNumClasses) throw DomainError("training sample without a valid label");
      const S m = logits.col(n).maxCoeff();
      const auto e = (logits.col(n).array() - m).exp();
      const S z = e.sum();
      total += std::log(z) - (logits(y, n) - m);
      d.col(n) = e / z;
      d(y, n) -= S(1);
    }
    if (grad) {
      zero_grad();
      backward(d / S(N));
    }
    return total / S(N);
  }

  /// Class probabilities (softmax of the logits) for one input.
  std::array<double, kNumClasses> probabilities(const Sample<S>& s) {
    const Mat<S> logits = forward(make_batch(s));
    return softmax(logits.col(0));
  }

  static std::array<double, kNumClasses> softmax(const Eigen::Ref<const Mat<S>>& logit) {
    std::array<double, kNumClasses> p{};
    double m = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kNumClasses; ++k) m = std::max(m, double(logit(k, 0)));
    double z = 0.0;
    for (int k = 0; k < kNumClasses; ++k) z += p[std::size_t(k)] = std::exp(double(logit(k, 0)) - m);
    for (double& v : p) v /= z;
    return p;
  }

  std::vector<int> predict(const std::vector<const Sample<S>*>& samples, std::size_t chunk = 256) {
    std::vector<int> out;
    for (std::size_t at = 0; at < samples.size(); at += chunk) {
      const auto end = std::min(samples.size(), at + chunk);
      const Mat<S> logits = forward(make_batch<S>(samples.begin() + std::ptrdiff_t(at), samples.begin() + std::ptrdiff_t(end)));
      for (Eigen::Index n = 0; n < logits.cols(); ++n) {
        Eigen::Index k;
        logits.col(n).maxCoeff(&k);
        out.push_back(int(k));
      }
    }
    return out;
  }

  void save(ModelEnvelope& m) const {
    m.metadata["arch"] = std::string(name_of(arch_));
    for (const auto* p : params()) {
      std::vector<double> data;
      data.reserve(std::size_t(p->value.size()));
      for (Eigen::Index i = 0; i < p->value.rows(); ++i)
        for (Eigen::Index j = 0; j < p->value.cols(); ++j) data.push_back(double(p->value(i, j)));
      m.add(p->name, {std::size_t(p->value.rows()), std::size_t(p->value.cols())}, std::move(data));
    }
  }

  static Network load(const ModelEnvelope& m) {
    Network net(arch_from_name(m.metadata.at("arch").get<std::string>()), 0);
    for (auto* p : net.params()) {
      const auto& blk = m.param(p->name);
      if (blk.shape != std::vector<std::size_t>{std::size_t(p->value.rows()), std::size_t(p->value.cols())})
        throw ModelLoadError("parameter '" + p->name + "' has the wrong shape");
      std::size_t k = 0;
      for (Eigen::Index i = 0; i < p->value.rows(); ++i)
        for (Eigen::Index j = 0; j < p->value.cols(); ++j) p->value(i, j) = static_cast<S>(blk.data[k++]);
    }
    return net;
  }

 private:
  Arch arch_ = Arch::cnn_mhi;
  std::array<Conv3x3<S>, 4> conv_;
  std::array<Rectifier<S>, 5> act_;
  MaxPool2<S> pool_;
  Dense<S> fc1_;
  Lstm<S> lstm_;
  Dense<S> out_;
};

}  // namespace texyz::nn
