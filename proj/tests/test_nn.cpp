#include <catch_amalgamated.hpp>

#include "texyz/nn/grad_check.hpp"
#include "texyz/nn/train.hpp"
#include "texyz/synth.hpp"
#include "texyz/preprocess.hpp"

using namespace texyz;
using namespace texyz::nn;

namespace {

constexpr Arch kArchs[] = {Arch::cnn_mhi, Arch::lstm, Arch::cnn_lstm};

// Dense layer + softmax cross-entropy with a hand-rolled finite-difference
// check, independent of Network.
double dense_softmax_grad_error() {
  Rng rng(2);
  Dense<double> d;
  d.init("d", 6, kNumClasses, rng);
  Mat<double> x(6, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const std::vector<int> y = {0, 3, 9, 3, 7};
  auto loss = [&](bool grad) {
    const Mat<double> z = d.forward(x);
    Mat<double> dz(z.rows(), z.cols());
    double total = 0;
    for (Eigen::Index n = 0; n < z.cols(); ++n) {
      const double m = z.col(n).maxCoeff();
      const auto e = (z.col(n).array() - m).exp();
      total += std::log(e.sum()) - (z(y[std::size_t(n)], n) - m);
      dz.col(n) = e / e.sum();
      dz(y[std::size_t(n)], n) -= 1;
    }
    if (grad) {
      d.W.grad.setZero();
      d.b.grad.setZero();
      d.backward(dz / double(z.cols()));
    }
    return total / double(z.cols());
  };
  loss(true);
  double worst = 0;
  for (auto* p : {&d.W, &d.b})
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& w = p->value.data()[i];
      const double keep = w;
      w = keep + 1e-5;
      const double up = loss(false);
      w = keep - 1e-5;
      const double down = loss(false);
      w = keep;
      const double ga = p->grad.data()[i], gn = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn)));
    }
  return worst;
}

}  // namespace

TEST_CASE("parameter counts are frozen per architecture") {
  CHECK(Network<double>(Arch::cnn_mhi, 1).param_count() == kCnnMhiParams);
  CHECK(Network<double>(Arch::lstm, 1).param_count() == kLstmParams);
  CHECK(Network<double>(Arch::cnn_lstm, 1).param_count() == kCnnLstmParams);
  // 80 + 1168 + 4640 + 9248 + 165952 + 650
  CHECK(kCnnMhiParams == 181738);
  // 4*32*(81+32) + 4*32 + 330
  CHECK(kLstmParams == 14922);
  // 80 + 1168 + 4*32*(256+32) + 4*32 + 330
  CHECK(kCnnLstmParams == 38570);
}

TEST_CASE("dense + softmax cross-entropy gradient") { CHECK(dense_softmax_grad_error() <= 1e-6); }

TEST_CASE("full architectures pass the gradient check") {
  for (Arch a : kArchs) {
    Network<double> net(a, 7);
    const auto batch = random_batch(a, 4, 5, 11);
    const double err = grad_check(net, batch, 13, 240);
    INFO(name_of(a) << " error " << err);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("a corrupted conv backward fails the gradient check") {
  for (Arch a : {Arch::cnn_mhi, Arch::cnn_lstm}) {
    Network<double> net(a, 7);
    net.corrupt_conv_backward(true);
    const double err = grad_check(net, random_batch(a, 4, 5, 11), 13, 240);
    INFO(name_of(a) << " error " << err);
    CHECK(err > 1e-2);
  }
}

TEST_CASE("fresh networks predict near-uniform probabilities that sum to one") {
  SynthSpec spec;
  spec.participants = 2;
  const auto ds = synth_dataset(spec, 13);
  for (Arch a : kArchs) {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      Network<double> net(a, seed);
      for (std::size_t i = 0; i < ds.size(); i += 3) {
        const auto r = prepare(ds[i]);
        const auto p = net.probabilities(a == Arch::cnn_mhi ? mhi_input<double>(r) : sequence_input<double>(r));
        double sum = 0;
        for (double v : p) {
          sum += v;
          INFO(name_of(a) << " seed " << seed);
          CHECK(std::abs(v - 0.1) <= 0.05);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("zero padding beyond the true length leaves logits unchanged") {
  Rng rng(4);
  for (Arch a : {Arch::lstm, Arch::cnn_lstm}) {
    Network<double> net(a, 5);
    for (int k = 0; k < 20; ++k) {
      Sample<double> s;
      s.length = rng.range(1, 10);
      for (int v = 0; v < s.length * kTaxels; ++v) s.values.push_back(rng.uniform());
      const Mat<double> base = net.forward(make_batch(s));
      const Mat<double> padded = net.forward(make_batch(s, s.length + rng.range(1, 30)));
      CHECK((base - padded).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("batched and single-sample forward agree") {
  Rng rng(6);
  for (Arch a : kArchs) {
    Network<double> net(a, 8);
    std::vector<Sample<double>> data(6);
    for (auto& s : data) {
      s.length = is_sequence(a) ? rng.range(1, 9) : 1;
      for (int v = 0; v < s.length * kTaxels; ++v) s.values.push_back(rng.uniform());
    }
    std::vector<const Sample<double>*> ptrs;
    for (const auto& s : data) ptrs.push_back(&s);
    const Mat<double> all = net.forward(make_batch(ptrs));
    for (std::size_t n = 0; n < data.size(); ++n)
      CHECK((net.forward(make_batch(data[n])).col(0) - all.col(Eigen::Index(n))).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("shape errors are rejected") {
  Network<double> net(Arch::cnn_mhi, 1);
  Sample<double> seq;
  seq.length = 3;
  seq.values.assign(3 * 81, 0.0);
  CHECK_THROWS_AS(net.forward(make_batch(seq)), SchemaError);
  Sample<double> bad;
  bad.values.assign(80, 0.0);
  CHECK_THROWS_AS(make_batch(bad), SchemaError);
}

TEST_CASE("first Adam step on a one-parameter quadratic") {
  // L(w) = (w - 3)^2 at w = 1: g = -4, m1 = 0.1 g, v1 = 0.001 g^2, and the
  // bias-corrected step is lr * g / (|g| + eps).
  Param<double> w;
  w.init("w", 1, 1);
  w.value(0, 0) = 1.0;
  w.grad(0, 0) = 2.0 * (1.0 - 3.0);
  Adam<double> opt({&w}, {});
  opt.step();
  CHECK(w.value(0, 0) == Catch::Approx(1.0 + 1e-3 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("input builders") {
  Recording r;
  r.label = Gesture::swipe_up;
  Frame f;
  for (int i = 0; i < kTaxels; ++i) f.p[std::size_t(i)] = i / 100.0;
  r.frames = {f};
  const auto s = sequence_input<double>(r);
  CHECK(s.length == 1);
  CHECK(s.label == id_of_label(Gesture::swipe_up));
  for (int i = 0; i < kTaxels; ++i) CHECK(s.values[std::size_t(i)] == f.p[std::size_t(i)]);
  // Row 2, column 5 lands at flat index 23.
  CHECK(s.values[23] == f.at(2, 5));
  const auto m = mhi_input<double>(r);
  const auto ref = mhi(r);
  CHECK(std::equal(ref.begin(), ref.end(), m.values.begin()));
}

TEST_CASE("seeded initialization and the first epoch are reproducible") {
  SynthSpec spec;
  spec.participants = 1;
  auto ds = synth_dataset(spec, 5);
  std::vector<Sample<float>> data;
  for (std::size_t i = 0; i < ds.size(); i += 9) data.push_back(sequence_input<float>(prepare(ds[i])));
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.seed = 3;
  Network<float> a(Arch::lstm, 9), b(Arch::lstm, 9);
  const auto ha = train(a, data, {}, cfg), hb = train(b, data, {}, cfg);
  CHECK(ha.history[0].train_loss == hb.history[0].train_loss);
  Network<double> c(Arch::cnn_mhi, 4), d(Arch::cnn_mhi, 4);
  const auto batch = random_batch(Arch::cnn_mhi, 8, 1, 2);
  CHECK(c.loss(batch, false) == d.loss(batch, false));
}

TEST_CASE("each architecture memorizes one recording per class") {
  SynthSpec spec;
  spec.participants = 1;
  const auto ds = synth_dataset(spec, 9);
  for (Arch a : kArchs) {
    std::vector<Sample<float>> data;
    for (int g = 0; g < kNumClasses; ++g) {
      const auto r = prepare(ds[std::size_t(g * 9)]);
      data.push_back(a == Arch::cnn_mhi ? mhi_input<float>(r) : sequence_input<float>(r));
    }
    Network<float> net(a, 1);
    TrainConfig cfg;
    cfg.batch = 10;
    cfg.max_epochs = 200;
    cfg.seed = 1;
    const auto res = train(net, data, {}, cfg);
    INFO(name_of(a) << " final loss " << res.history.back().train_loss);
    CHECK(accuracy(net, data) == 1.0);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
  }
}
