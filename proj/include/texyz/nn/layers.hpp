#pragma once

// Layers with hand-written backward passes. Activations are column-major
// matrices: for spatial layers rows are channels and columns run over
// (frame, pixel) with the pixel index fastest; for dense layers rows are
// features and columns are samples.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "texyz/core.hpp"
#include "texyz/rng.hpp"

namespace texyz::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  void init(std::string n, Eigen::Index rows, Eigen::Index cols) {
    name = std::move(n);
    value = Mat<S>::Zero(rows, cols);
    grad = Mat<S>::Zero(rows, cols);
  }
};

// Glorot-uniform over [-a, a], a = sqrt(6 / (fan_in + fan_out)).
template <class S>
void glorot(Param<S>& p, double fan_in, double fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = static_cast<S>(rng.uniform(-a, a));
}

inline constexpr int kPixels = kTaxels;

// For each output pixel, the input pixel under each of the 9 kernel taps
// (row-major over dy, dx in -1..1), or -1 outside the zero padding.
inline const std::array<std::array<int, 9>, kPixels>& neighbour_table() {
  static const auto table = [] {
    std::array<std::array<int, 9>, kPixels> t{};
    for (int r = 0; r < kGrid; ++r)
      for (int c = 0; c < kGrid; ++c)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int rr = r + dy, cc = c + dx;
            t[std::size_t(r * kGrid + c)][std::size_t((dy + 1) * 3 + dx + 1)] =
                (rr < 0 || rr >= kGrid || cc < 0 || cc >= kGrid) ? -1 : rr * kGrid + cc;
          }
    return t;
  }();
  return table;
}

/// 3x3 convolution, stride 1, zero padding 1, on 9x9 maps.
template <class S>
struct Conv3x3 {
  int cin = 1, cout = 1;
  Param<S> W, b;  // W: cout x (cin*9), column index ci*9 + tap
  Mat<S> cols;    // cached im2col of the last input
  // Test-only mutation: route input gradients through the wrong tap.
  bool corrupt_backward = false;

  void init(const std::string& name, int in, int out, Rng& rng) {
    cin = in;
    cout = out;
    W.init(name + ".weight", out, in * 9);
    b.init(name + ".bias", out, 1);
    glorot(W, in * 9.0, out * 9.0, rng);
  }

  Mat<S> forward(const Mat<S>& x) {
    const Eigen::Index n = x.cols();
    const auto& nb = neighbour_table();
    cols.setZero(cin * 9, n);
    for (Eigen::Index f = 0; f < n / kPixels; ++f)
      for (int p = 0; p < kPixels; ++p) {
        const Eigen::Index col = f * kPixels + p;
        for (int k = 0; k < 9; ++k) {
          const int q = nb[std::size_t(p)][std::size_t(k)];
          if (q < 0) continue;
          for (int c = 0; c < cin; ++c) cols(c * 9 + k, col) = x(c, f * kPixels + q);
        }
      }
    Mat<S> y = W.value * cols;
    y.colwise() += b.value.col(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    W.grad.noalias() += dy * cols.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    const Mat<S> dcols = W.value.transpose() * dy;
    const auto& nb = neighbour_table();
    Mat<S> dx = Mat<S>::Zero(cin, dy.cols());
    for (Eigen::Index f = 0; f < dy.cols() / kPixels; ++f)
      for (int p = 0; p < kPixels; ++p) {
        const Eigen::Index col = f * kPixels + p;
        for (int k = 0; k < 9; ++k) {
          const int q = nb[std::size_t(p)][std::size_t(k)];
          if (q < 0) continue;
          const int src = corrupt_backward ? (k + 1) % 9 : k;
          for (int c = 0; c < cin; ++c) dx(c, f * kPixels + q) += dcols(c * 9 + src, col);
        }
      }
    return dx;
  }
};

/// Leaky ReLU (slope 0 gives plain ReLU).
template <class S>
struct Rectifier {
  S slope = S(0.01);
  Mat<S> input;

  Mat<S> forward(const Mat<S>& x) {
    input = x;
    return x.unaryExpr([s = slope](S v) { return v > S(0) ? v : s * v; });
  }

  Mat<S> backward(const Mat<S>& dy) const {
    return dy.binaryExpr(input, [s = slope](S g, S v) { return v > S(0) ? g : s * g; });
  }
};

/// 2x2 max pooling, stride 2, floor: 9x9 -> 4x4.
template <class S>
struct MaxPool2 {
  static constexpr int kOut = 4;
  std::vector<Eigen::Index> argmax;  // flat index into the input per output element
  Eigen::Index in_rows = 0, in_cols = 0;

  Mat<S> forward(const Mat<S>& x) {
    in_rows = x.rows();
    in_cols = x.cols();
    const Eigen::Index frames = x.cols() / kPixels;
    Mat<S> y(x.rows(), frames * kOut * kOut);
    argmax.assign(std::size_t(y.size()), 0);
    for (Eigen::Index f = 0; f < frames; ++f)
      for (int i = 0; i < kOut; ++i)
        for (int j = 0; j < kOut; ++j) {
          const Eigen::Index oc = f * kOut * kOut + i * kOut + j;
          for (Eigen::Index c = 0; c < x.rows(); ++c) {
            Eigen::Index best = f * kPixels + (2 * i) * kGrid + 2 * j;
            for (int di = 0; di < 2; ++di)
              for (int dj = 0; dj < 2; ++dj) {
                const Eigen::Index ic = f * kPixels + (2 * i + di) * kGrid + 2 * j + dj;
                if (x(c, ic) > x(c, best)) best = ic;
              }
            y(c, oc) = x(c, best);
            argmax[std::size_t(oc * x.rows() + c)] = best;
          }
        }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) const {
    Mat<S> dx = Mat<S>::Zero(in_rows, in_cols);
    for (Eigen::Index oc = 0; oc < dy.cols(); ++oc)
      for (Eigen::Index c = 0; c < dy.rows(); ++c) dx(c, argmax[std::size_t(oc * dy.rows() + c)]) += dy(c, oc);
    return dx;
  }
};

template <class S>
struct Dense {
  Param<S> W, b;
  Mat<S> input;

  void init(const std::string& name, int in, int out, Rng& rng) {
    W.init(name + ".weight", out, in);
    b.init(name + ".bias", out, 1);
    glorot(W, in, out, rng);
  }

  Mat<S> forward(const Mat<S>& x) {
    input = x;
    Mat<S> y = W.value * x;
    y.colwise() += b.value.col(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    W.grad.noalias() += dy * input.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    return W.value.transpose() * dy;
  }
};

/// Single-layer LSTM, gate order (i, f, g, o). Inputs are time-major: the
/// columns [t*N, (t+1)*N) hold step t for all N sequences. The output for
/// sequence n is its hidden state at step lengths[n] - 1.
template <class S>
struct Lstm {
  int in = 1, hidden = 32;
  Param<S> Wx, Wh, b;
  // Per-step caches.
  std::vector<Mat<S>> gates, cells, hiddens;  // activated gates (4H x N), c_t, h_t
  Mat<S> x_cache;
  std::vector<int> lengths;

  void init(const std::string& name, int input, int hid, Rng& rng) {
    in = input;
    hidden = hid;
    Wx.init(name + ".weight_ih", 4 * hid, input);
    Wh.init(name + ".weight_hh", 4 * hid, hid);
    b.init(name + ".bias", 4 * hid, 1);
    glorot(Wx, input, 4.0 * hid, rng);
    glorot(Wh, hid, 4.0 * hid, rng);
    b.value.middleRows(hid, hid).setConstant(S(1));  // forget gate
  }

  static S sigmoid(S v) { return S(1) / (S(1) + std::exp(-v)); }

  Mat<S> forward(const Mat<S>& x, const std::vector<int>& lens) {
    const auto N = Eigen::Index(lens.size());
    const Eigen::Index T = N == 0 ? 0 : x.cols() / N;
    lengths = lens;
    x_cache = x;
    gates.assign(std::size_t(T), {});
    cells.assign(std::size_t(T), {});
    hiddens.assign(std::size_t(T), {});
    const Eigen::Index H = hidden;
    Mat<S> h = Mat<S>::Zero(H, N), c = Mat<S>::Zero(H, N);
    Mat<S> out = Mat<S>::Zero(H, N);
    // Input projections for every step at once.
    Mat<S> zx = Wx.value * x;
    zx.colwise() += b.value.col(0);
    for (Eigen::Index t = 0; t < T; ++t) {
      Mat<S> z = zx.middleCols(t * N, N);
      z.noalias() += Wh.value * h;
      z.topRows(2 * H) = z.topRows(2 * H).unaryExpr([](S v) { return sigmoid(v); });
      z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh();
      z.bottomRows(H) = z.bottomRows(H).unaryExpr([](S v) { return sigmoid(v); });
      c = z.middleRows(H, H).cwiseProduct(c) + z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
      h = z.bottomRows(H).cwiseProduct(c.array().tanh().matrix());
      gates[std::size_t(t)] = std::move(z);
      cells[std::size_t(t)] = c;
      hiddens[std::size_t(t)] = h;
      for (Eigen::Index n = 0; n < N; ++n)
        if (lens[std::size_t(n)] - 1 == t) out.col(n) = h.col(n);
    }
    return out;
  }

  Mat<S> backward(const Mat<S>& dout) {
    const auto N = Eigen::Index(lengths.size());
    const auto T = Eigen::Index(gates.size());
    const Eigen::Index H = hidden;
    Mat<S> dh = Mat<S>::Zero(H, N), dc = Mat<S>::Zero(H, N);
    Mat<S> dz_all(4 * H, T * N);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      for (Eigen::Index n = 0; n < N; ++n)
        if (lengths[std::size_t(n)] - 1 == t) dh.col(n) += dout.col(n);
      const Mat<S>& z = gates[std::size_t(t)];
      const Mat<S>& ct = cells[std::size_t(t)];
      const Mat<S> cprev = t > 0 ? cells[std::size_t(t - 1)] : Mat<S>::Zero(H, N);
      const Mat<S> hprev = t > 0 ? hiddens[std::size_t(t - 1)] : Mat<S>::Zero(H, N);
      const auto i = z.topRows(H).array(), f = z.middleRows(H, H).array(), g = z.middleRows(2 * H, H).array(),
                 o = z.bottomRows(H).array();
      const auto tc = ct.array().tanh();
      dc.array() += dh.array() * o * (S(1) - tc * tc);
      auto dz = dz_all.middleCols(t * N, N);
      dz.topRows(H) = (dc.array() * g * i * (S(1) - i)).matrix();
      dz.middleRows(H, H) = (dc.array() * cprev.array() * f * (S(1) - f)).matrix();
      dz.middleRows(2 * H, H) = (dc.array() * i * (S(1) - g * g)).matrix();
      dz.bottomRows(H) = (dh.array() * tc * o * (S(1) - o)).matrix();
      Wh.grad.noalias() += dz * hprev.transpose();
      dh = Wh.value.transpose() * dz;
      dc = (dc.array() * f).matrix();
    }
    Wx.grad.noalias() += dz_all * x_cache.transpose();
    b.grad.col(0) += dz_all.rowwise().sum();
    return Wx.value.transpose() * dz_all;
  }
};

}  // namespace texyz::nn
