#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "texyz/nn/adam.hpp"
#include "texyz/nn/network.hpp"

namespace texyz::nn {

struct TrainConfig {
  AdamConfig adam{};
  int batch = 32;
  int max_epochs = 60;
  int patience = 10;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

template <class S>
double accuracy(Network<S>& net, const std::vector<Sample<S>>& data) {
  if (data.empty()) return 0.0;
  std::vector<const Sample<S>*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  const auto pred = net.predict(ptrs);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < data.size(); ++i) ok += pred[i] == data[i].label ? 1 : 0;
  return double(ok) / double(data.size());
}

/// Mini-batch Adam with early stopping on validation accuracy. The network
/// ends holding the parameters of its best validation epoch. Without a
/// validation set every epoch runs and the final parameters are kept.
template <class S>
TrainResult train(Network<S>& net, const std::vector<Sample<S>>& data, const std::vector<Sample<S>>& val,
                  const TrainConfig& cfg) {
  if (data.empty()) throw DomainError("cannot train on an empty dataset");
  if (cfg.batch < 1) throw DomainError("batch size must be at least 1");
  Rng rng(cfg.seed);
  Adam<S> opt(net.params(), cfg.adam);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult res;
  std::vector<Mat<S>> best;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch)) {
      const auto end = std::min(order.size(), at + std::size_t(cfg.batch));
      std::vector<const Sample<S>*> chunk;
      for (std::size_t k = at; k < end; ++k) chunk.push_back(&data[order[k]]);
      const S l = net.loss(make_batch(chunk), true);
      loss_sum += double(l) * double(end - at);
      opt.step();
    }
    EpochRecord rec{epoch, loss_sum / double(data.size()), val.empty() ? 0.0 : accuracy(net, val)};
    res.history.push_back(rec);
    if (val.empty()) continue;
    if (res.best_epoch < 0 || rec.val_accuracy > res.best_val_accuracy) {
      res.best_epoch = epoch;
      res.best_val_accuracy = rec.val_accuracy;
      best.clear();
      for (const auto* p : net.params()) best.push_back(p->value);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (!best.empty()) {
    auto ps = net.params();
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = best[k];
  } else {
    res.best_epoch = int(res.history.size()) - 1;
  }
  return res;
}

}  // namespace texyz::nn
