#pragma once

// The nine recognition methods (two feature families times three classical
// classifiers, plus three networks) behind one trained-model type, and the
// offline train/test pipeline.

#include <array>
#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "texyz/augment.hpp"
#include "texyz/eval.hpp"
#include "texyz/features.hpp"
#include "texyz/ml/knn.hpp"
#include "texyz/ml/random_forest.hpp"
#include "texyz/ml/standardizer.hpp"
#include "texyz/ml/svm.hpp"
#include "texyz/model_file.hpp"
#include "texyz/nn/train.hpp"
#include "texyz/preprocess.hpp"

namespace texyz {

enum class Method { st_knn, st_rf, st_svm, tp_knn, tp_rf, tp_svm, cnn, lstm, cnnlstm };

inline constexpr std::array<Method, 9> kMethods = {Method::st_knn, Method::st_rf,  Method::st_svm,
                                                   Method::tp_knn, Method::tp_rf,  Method::tp_svm,
                                                   Method::cnn,    Method::lstm,   Method::cnnlstm};

inline std::string_view name_of(Method m) {
  constexpr std::array<std::string_view, 9> names = {"st-knn", "st-rf", "st-svm", "tp-knn", "tp-rf",
                                                     "tp-svm", "cnn",   "lstm",   "cnnlstm"};
  return names[static_cast<std::size_t>(m)];
}

inline Method method_from_name(std::string_view n) {
  for (Method m : kMethods)
    if (name_of(m) == n) return m;
  throw DomainError("unknown method: " + std::string(n));
}

enum class Family { knn, rf, svm, nn };

inline Family family_of(Method m) {
  switch (m) {
    case Method::st_knn:
    case Method::tp_knn: return Family::knn;
    case Method::st_rf:
    case Method::tp_rf: return Family::rf;
    case Method::st_svm:
    case Method::tp_svm: return Family::svm;
    default: return Family::nn;
  }
}

inline bool is_network(Method m) { return family_of(m) == Family::nn; }

inline FeatureSchema schema_of(Method m) {
  if (is_network(m)) throw DomainError("networks take raw frames, not a feature schema");
  return static_cast<int>(m) < 3 ? FeatureSchema::spatio_temporal_v1 : FeatureSchema::touch_pattern_v1;
}

inline nn::Arch arch_of(Method m) {
  switch (m) {
    case Method::cnn: return nn::Arch::cnn_mhi;
    case Method::lstm: return nn::Arch::lstm;
    case Method::cnnlstm: return nn::Arch::cnn_lstm;
    default: throw DomainError("not a network method: " + std::string(name_of(m)));
  }
}

/// Model-file kind tag.
inline std::string kind_of(Method m) {
  switch (family_of(m)) {
    case Family::knn: return "knn";
    case Family::rf: return "rf";
    case Family::svm: return "svm";
    default: return std::string(name_of(m));
  }
}

inline const std::vector<std::string>& known_kinds() {
  static const std::vector<std::string> k = {"knn", "rf", "svm", "cnn", "lstm", "cnnlstm"};
  return k;
}

// ---------------------------------------------------------------------------
// Hyperparameters

struct Hyper {
  int k = 7;
  ml::RfConfig rf{};
  ml::SvmConfig svm{};
  nn::TrainConfig nn{};
  double val_fraction = 0.1;  // networks: held out of the training split before augmentation
};

/// Published operating points; the two augmentation settings have separate rows.
inline Hyper paper_hyper(Method m, bool augmented, std::uint64_t seed) {
  Hyper h;
  h.rf.seed = mix_seed(seed, 0x7266ULL);
  h.nn.seed = mix_seed(seed, 0x6e6eULL);
  switch (m) {
    case Method::st_knn: h.k = 7; break;
    case Method::tp_knn: h.k = augmented ? 1 : 4; break;
    case Method::st_svm:
      h.svm.C = augmented ? std::ldexp(1.0, 9) : std::ldexp(1.0, 7);
      h.svm.gamma = augmented ? std::ldexp(1.0, -13) : std::ldexp(1.0, -11);
      break;
    case Method::tp_svm:
      h.svm.C = augmented ? std::ldexp(1.0, 9) : std::ldexp(1.0, 13);
      h.svm.gamma = augmented ? std::ldexp(1.0, -7) : std::ldexp(1.0, -13);
      break;
    default: break;
  }
  return h;
}

/// Search grid for leave-one-subject-out tuning; always contains both
/// published rows for the method.
inline std::vector<Hyper> cv_grid(Method m, std::uint64_t seed) {
  const Hyper base = paper_hyper(m, true, seed);
  std::vector<Hyper> grid;
  switch (family_of(m)) {
    case Family::knn:
      for (int k : {1, 3, 4, 5, 7, 9}) {
        Hyper h = base;
        h.k = k;
        grid.push_back(h);
      }
      break;
    case Family::rf:
      for (int depth : {5, 7, 9}) {
        Hyper h = base;
        h.rf.max_depth = depth;
        grid.push_back(h);
      }
      break;
    case Family::svm:
      for (int c : {7, 9, 11, 13})
        for (int g : {-13, -11, -9, -7}) {
          Hyper h = base;
          h.svm.C = std::ldexp(1.0, c);
          h.svm.gamma = std::ldexp(1.0, g);
          grid.push_back(h);
        }
      break;
    case Family::nn: throw DomainError("no search grid for network methods");
  }
  return grid;
}

inline nlohmann::json hyper_json(Method m, const Hyper& h) {
  nlohmann::json j;
  switch (family_of(m)) {
    case Family::knn: j["k"] = h.k; break;
    case Family::rf:
      j["n_estimators"] = h.rf.n_estimators;
      j["max_depth"] = h.rf.max_depth;
      j["min_samples_split"] = h.rf.min_samples_split;
      j["features_per_split"] = h.rf.features_per_split;
      j["seed"] = h.rf.seed;
      break;
    case Family::svm:
      j["C"] = h.svm.C;
      j["gamma"] = h.svm.gamma;
      j["log2_C"] = std::log2(h.svm.C);
      j["log2_gamma"] = std::log2(h.svm.gamma);
      j["tol"] = h.svm.tol;
      break;
    case Family::nn:
      j["lr"] = h.nn.adam.lr;
      j["batch"] = h.nn.batch;
      j["max_epochs"] = h.nn.max_epochs;
      j["patience"] = h.nn.patience;
      j["seed"] = h.nn.seed;
      j["val_fraction"] = h.val_fraction;
      break;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Featurization

inline std::vector<double> featurize(const Recording& prepared, FeatureSchema s) {
  return s == FeatureSchema::spatio_temporal_v1 ? spatio_temporal_features(pad_to_length(prepared, kPadLength)).values
                                                : touch_pattern_features(prepared).values;
}

inline ml::Matrix feature_matrix(std::span<const Recording> prepared, FeatureSchema s) {
  ml::Matrix X(static_cast<Eigen::Index>(prepared.size()), static_cast<Eigen::Index>(dimension_of(s)));
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto v = featurize(prepared[i], s);
    for (std::size_t j = 0; j < v.size(); ++j) X(Eigen::Index(i), Eigen::Index(j)) = v[j];
  }
  return X;
}

inline std::vector<int> labels_of(std::span<const Recording> rs) {
  std::vector<int> y;
  y.reserve(rs.size());
  for (const auto& r : rs) {
    if (!r.label) throw DataError("recording '" + r.id + "' is unlabeled");
    y.push_back(id_of_label(*r.label));
  }
  return y;
}

inline nn::Sample<float> network_input(const Recording& prepared, nn::Arch a) {
  return a == nn::Arch::cnn_mhi ? nn::mhi_input<float>(prepared) : nn::sequence_input<float>(prepared);
}

inline std::vector<Recording> prepare_all(std::span<const Recording> raw, const PreprocessConfig& cfg = {}) {
  std::vector<Recording> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(prepare(r, cfg));
  return out;
}

// ---------------------------------------------------------------------------
// Trained model

struct NetworkLog {
  nn::TrainResult result;
  std::size_t fit_samples = 0, val_samples = 0;
};

class Model {
 public:
  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  Method method() const { return method_; }
  const nlohmann::json& metadata() const { return meta_; }
  nlohmann::json& metadata() { return meta_; }

  /// Trains on already prepared recordings. `val` is used only by networks.
  static Model fit(Method m, const Hyper& h, std::span<const Recording> train, std::span<const Recording> val = {},
                   NetworkLog* log = nullptr) {
    if (train.empty()) throw DataError("cannot train on an empty dataset");
    Model model;
    model.method_ = m;
    model.meta_["hyperparameters"] = hyper_json(m, h);
    const auto y = labels_of(train);
    if (is_network(m)) {
      const auto arch = arch_of(m);
      std::vector<nn::Sample<float>> data, vdata;
      for (const auto& r : train) data.push_back(network_input(r, arch));
      for (const auto& r : val) vdata.push_back(network_input(r, arch));
      model.net_ = std::make_unique<nn::Network<float>>(arch, h.nn.seed);
      auto res = nn::train(*model.net_, data, vdata, h.nn);
      if (log) *log = {std::move(res), data.size(), vdata.size()};
      model.net_mutex_ = std::make_unique<std::mutex>();
      return model;
    }
    const FeatureSchema s = schema_of(m);
    ml::Matrix X = feature_matrix(train, s);
    switch (family_of(m)) {
      case Family::knn:
        model.std_ = ml::Standardizer::fit(X);
        model.knn_ = ml::Knn::fit(model.std_->apply(X), y, {h.k});
        break;
      case Family::rf: model.rf_ = ml::RandomForest::fit(X, y, h.rf); break;
      case Family::svm:
        model.std_ = ml::Standardizer::fit(X);
        model.svm_ = ml::Svm::fit(model.std_->apply(X), y, h.svm);
        break;
      case Family::nn: break;
    }
    return model;
  }

  /// Predictions for prepared recordings.
  std::vector<int> predict_prepared(std::span<const Recording> rs) const {
    if (rs.empty()) return {};
    if (is_network(method_)) {
      std::vector<nn::Sample<float>> data;
      for (const auto& r : rs) data.push_back(network_input(r, arch_of(method_)));
      std::vector<const nn::Sample<float>*> ptrs;
      for (const auto& d : data) ptrs.push_back(&d);
      std::lock_guard lock(*net_mutex_);
      return net_->predict(ptrs);
    }
    ml::Matrix X = feature_matrix(rs, schema_of(method_));
    if (std_) X = std_->apply(X);
    switch (family_of(method_)) {
      case Family::knn: return knn_->predict(X);
      case Family::rf: return rf_->predict(X);
      default: return svm_->predict(X);
    }
  }

  int predict(const Recording& raw) const {
    const Recording p = prepare(raw);
    return predict_prepared(std::span<const Recording>(&p, 1)).front();
  }

  /// Per-class probabilities (networks) or vote shares (classical models).
  std::array<double, kNumClasses> scores(const Recording& raw) const {
    const Recording p = prepare(raw);
    if (is_network(method_)) {
      const auto sample = network_input(p, arch_of(method_));
      std::lock_guard lock(*net_mutex_);
      return net_->probabilities(sample);
    }
    const auto v = featurize(p, schema_of(method_));
    ml::Vector x = Eigen::Map<const ml::Vector>(v.data(), Eigen::Index(v.size()));
    if (std_) x = std_->apply(x);
    switch (family_of(method_)) {
      case Family::knn: return knn_->vote_shares(x);
      case Family::rf: return rf_->vote_shares(x);
      default: return svm_->vote_shares(x);
    }
  }

  ModelEnvelope envelope() const {
    ModelEnvelope e;
    e.kind = kind_of(method_);
    e.schema = is_network(method_) ? (method_ == Method::cnn ? "mhi_v1" : "sequence_v1")
                                   : std::string(name_of(schema_of(method_)));
    e.metadata = meta_;
    e.metadata["method"] = std::string(name_of(method_));
    e.metadata["preprocess"] = {{"window", PreprocessConfig{}.window}, {"pad_length", kPadLength}};
    if (std_) std_->save(e);
    if (knn_) knn_->save(e);
    if (rf_) rf_->save(e);
    if (svm_) svm_->save(e);
    if (net_) net_->save(e);
    return e;
  }

  std::string serialize() const { return dump_envelope(envelope()); }

  void save(const std::string& path) const { write_text_file(path, serialize()); }

  static Model from_envelope(const ModelEnvelope& e) {
    Model m;
    try {
      m.method_ = method_from_name(e.metadata.at("method").get<std::string>());
    } catch (const DomainError& err) {
      throw ModelLoadError(err.what());
    } catch (const std::exception&) {
      throw ModelLoadError("model file lacks a method tag");
    }
    if (kind_of(m.method_) != e.kind) throw ModelLoadError("model kind '" + e.kind + "' does not match its method");
    m.meta_ = e.metadata;
    m.meta_.erase("method");
    m.meta_.erase("preprocess");
    try {
      switch (family_of(m.method_)) {
        case Family::knn:
          m.std_ = ml::Standardizer::load(e);
          m.knn_ = ml::Knn::load(e);
          break;
        case Family::rf: m.rf_ = ml::RandomForest::load(e); break;
        case Family::svm:
          m.std_ = ml::Standardizer::load(e);
          m.svm_ = ml::Svm::load(e);
          break;
        case Family::nn:
          m.net_ = std::make_unique<nn::Network<float>>(nn::Network<float>::load(e));
          m.net_mutex_ = std::make_unique<std::mutex>();
          if (m.net_->arch() != arch_of(m.method_)) throw ModelLoadError("network architecture does not match method");
          break;
      }
    } catch (const ModelLoadError&) {
      throw;
    } catch (const std::exception& err) {
      throw ModelLoadError(std::string("malformed model: ") + err.what());
    }
    if (!is_network(m.method_)) {
      const auto d = Eigen::Index(dimension_of(schema_of(m.method_)));
      if (std::string(name_of(schema_of(m.method_))) != e.schema) throw ModelLoadError("schema tag mismatch");
      if (m.std_ && m.std_->mean.size() != d) throw ModelLoadError("standardizer dimension mismatch");
    }
    return m;
  }

  static Model parse(const std::string& text) { return from_envelope(parse_envelope(text, known_kinds())); }
  static Model load(const std::string& path) { return parse(read_text_file(path)); }

 private:
  Method method_ = Method::tp_rf;
  nlohmann::json meta_ = nlohmann::json::object();
  std::optional<ml::Standardizer> std_;
  std::optional<ml::Knn> knn_;
  std::optional<ml::RandomForest> rf_;
  std::optional<ml::Svm> svm_;
  std::unique_ptr<nn::Network<float>> net_;
  // Network forward passes cache activations, so concurrent callers take turns.
  std::unique_ptr<std::mutex> net_mutex_;
};

// ---------------------------------------------------------------------------
// Offline pipeline

struct RunConfig {
  Method method = Method::tp_rf;
  bool augment = false;
  bool cv = false;
  std::uint64_t seed = 1;
  double train_fraction = 0.85;
  std::optional<Hyper> hyper;  // overrides the published row
};

struct RunResult {
  Model model;
  Hyper hyper;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::size_t train_count = 0;  // training split before augmentation
  std::size_t fit_count = 0;    // samples the model was fit on
  std::size_t test_count = 0;
  std::optional<LosoResult> cv;
  std::optional<NetworkLog> network;
  double train_seconds = 0.0;
};

inline std::vector<Recording> maybe_augment(std::vector<Recording> rs, bool augment) {
  return augment ? augment_dataset(rs).recordings : rs;
}

/// Prepare, split 85/15 (stratified), optionally tune by leave-one-subject-out
/// on the training split, augment the training side only, fit, and score on
/// the untouched test split.
inline RunResult run_offline(std::span<const Recording> raw, const RunConfig& cfg) {
  if (raw.empty()) throw DataError("dataset is empty");
  const auto prepared = prepare_all(raw);
  const Split parts = split(prepared, {cfg.train_fraction, cfg.seed, false});
  RunResult res;
  res.train_count = parts.train.size();
  res.test_count = parts.test.size();
  res.hyper = cfg.hyper ? *cfg.hyper : paper_hyper(cfg.method, cfg.augment, cfg.seed);

  if (cfg.cv) {
    const auto grid = cv_grid(cfg.method, cfg.seed);
    res.cv = loso_cv(
        parts.train, grid.size(),
        [&](const std::vector<Recording>& tr, const std::vector<Recording>& held, std::size_t g) {
          const Model m = Model::fit(cfg.method, grid[g], maybe_augment(tr, cfg.augment));
          return confusion(labels_of(held), m.predict_prepared(held)).accuracy();
        },
        cfg.seed);
    res.hyper = grid[res.cv->best];
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (is_network(cfg.method)) {
    const Split inner = split(parts.train, {1.0 - res.hyper.val_fraction, mix_seed(cfg.seed, 0x76616cULL), false});
    const auto fit_set = maybe_augment(inner.train, cfg.augment);
    res.fit_count = fit_set.size();
    NetworkLog log;
    res.model = Model::fit(cfg.method, res.hyper, fit_set, inner.test, &log);
    res.network = std::move(log);
  } else {
    const auto fit_set = maybe_augment(parts.train, cfg.augment);
    res.fit_count = fit_set.size();
    res.model = Model::fit(cfg.method, res.hyper, fit_set);
  }
  res.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.confusion = confusion(labels_of(parts.test), res.model.predict_prepared(parts.test));
  res.accuracy = res.confusion.accuracy();
  return res;
}

}  // namespace texyz
