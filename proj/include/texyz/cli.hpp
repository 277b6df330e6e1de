#pragma once

// Command-line workflows. Every command writes a manifest (JSON) recording
// its full configuration, seeds, input/output paths and artifact hashes, so
// `rerun --manifest` can repeat it and compare the artifacts bit for bit.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "texyz/codec.hpp"
#include "texyz/dataset_io.hpp"
#include "texyz/methods.hpp"
#include "texyz/osc.hpp"
#include "texyz/service.hpp"
#include "texyz/synth.hpp"
#include "texyz/udp.hpp"

namespace texyz::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
// rerun finished but an artifact differs from the recorded one.
inline constexpr int kExitMismatch = 4;

inline std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

/// Ends a running `serve` (also wired to SIGINT and SIGTERM).
inline void request_stop() { stop_flag().store(true); }

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

inline std::string config_hash(const nlohmann::json& config) { return codec::sha256_hex(config.dump()); }

inline nlohmann::json artifact(const std::string& path) { return {{"path", path}, {"sha256", codec::sha256_file(path)}}; }

// Written through a temporary so readers never see half a manifest.
inline void write_json(const std::string& path, const nlohmann::json& j) {
  const std::string tmp = path + ".tmp";
  write_text_file(tmp, j.dump(2) + "\n");
  std::filesystem::rename(tmp, path);
}

inline nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + " is not valid JSON: " + e.what());
  }
}

inline nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : cm.counts) rows.push_back(row);
  return {{"classes", [] {
             nlohmann::json names = nlohmann::json::array();
             for (int c = 0; c < kNumClasses; ++c) names.push_back(std::string(name_of(label_of_id(c))));
             return names;
           }()},
          {"rows_true_columns_predicted", rows}};
}

inline std::string format_confusion(const ConfusionMatrix& cm) {
  std::ostringstream ss;
  ss << std::setw(16) << "true \\ pred";
  for (int c = 0; c < kNumClasses; ++c) ss << std::setw(5) << c;
  ss << "   recall\n";
  for (int r = 0; r < kNumClasses; ++r) {
    ss << std::setw(2) << r << ' ' << std::setw(13) << name_of(label_of_id(r));
    for (int c = 0; c < kNumClasses; ++c) ss << std::setw(5) << cm.counts[std::size_t(r)][std::size_t(c)];
    ss << "   " << std::fixed << std::setprecision(3) << cm.recall(r) << '\n';
  }
  ss << "accuracy " << std::fixed << std::setprecision(4) << cm.accuracy() << " (" << cm.trace() << '/' << cm.total()
     << ")\n";
  const auto pairs = cm.confused_pairs();
  ss << "most confused:";
  for (std::size_t i = 0; i < 3 && pairs[i].second > 0; ++i)
    ss << ' ' << name_of(label_of_id(pairs[i].first.first)) << '/' << name_of(label_of_id(pairs[i].first.second))
       << '=' << pairs[i].second;
  ss << '\n';
  return ss.str();
}

// ---------------------------------------------------------------------------
// Commands. Each takes fully parsed options so rerun can call it directly.

struct GenerateOptions {
  std::string out;
  std::uint64_t seed = 1;
  int participants = 34;
  std::string manifest;  // default: <out>.manifest.json
};

struct TrainOptions {
  std::string data, out;
  std::string method;
  bool augment = false, cv = false;
  std::uint64_t seed = 1;
  double train_fraction = 0.85;
  std::string results;   // default: <out>.results.json
  std::string manifest;  // default: <out>.manifest.json
};

struct EvalOptions {
  std::string model, data;
  std::string manifest;  // default: <model>.eval.manifest.json
};

struct ServeOptions {
  std::string model;
  std::uint16_t udp = 9009, ws = kDefaultWsPort;
  std::string log = "texyz-serve.log";
  double duration_s = 0.0;  // 0: until interrupted
  std::string manifest;     // default: <log>.manifest.json
};

struct ReplayOptions {
  std::string data;
  std::string host = "127.0.0.1";
  std::uint16_t port = 9009;
  int count = 20;
  int gap = 30;
  double rate_hz = kNominalRateHz;
  std::uint64_t seed = 1;
  std::string manifest;  // default: <data>.replay.manifest.json
};

inline std::string or_default(const std::string& v, const std::string& fallback) { return v.empty() ? fallback : v; }

inline nlohmann::json manifest_base(const std::string& command, const nlohmann::json& config) {
  return {{"command", command},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"started_utc", utc_now()}};
}

inline int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  if (o.participants < 1) throw DomainError("--participants must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.participants = o.participants;
  const auto ds = synth_dataset(spec, o.seed);
  write_dataset(ds, o.out);
  const nlohmann::json config = {{"seed", o.seed}, {"participants", o.participants}};
  auto m = manifest_base("generate", config);
  m["seeds"] = {{"corpus", o.seed}};
  m["outputs"] = {{"dataset", artifact(o.out)}};
  m["records"] = ds.size();
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(or_default(o.manifest, o.out + ".manifest.json"), m);
  out << "wrote " << ds.size() << " recordings to " << o.out << '\n';
  return kExitOk;
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.method = method_from_name(o.method);
  cfg.augment = o.augment;
  cfg.cv = o.cv;
  cfg.seed = o.seed;
  cfg.train_fraction = o.train_fraction;
  const auto raw = read_dataset(o.data);
  const std::string data_hash = codec::sha256_file(o.data);
  RunResult r = run_offline(raw, cfg);

  r.model.metadata()["training"] = {{"dataset_sha256", data_hash},
                                    {"seed", o.seed},
                                    {"train_fraction", o.train_fraction},
                                    {"augment", o.augment},
                                    {"cv", o.cv},
                                    {"test_accuracy", r.accuracy}};
  r.model.save(o.out);

  const nlohmann::json config = {{"method", o.method},  {"augment", o.augment}, {"cv", o.cv},
                                 {"seed", o.seed},      {"train_fraction", o.train_fraction},
                                 {"data_sha256", data_hash}};
  nlohmann::json results = {{"config_hash", config_hash(config)},
                            {"method", o.method},
                            {"seed", o.seed},
                            {"augment", o.augment},
                            {"cv", o.cv},
                            {"accuracy", r.accuracy},
                            {"train_count", r.train_count},
                            {"fit_count", r.fit_count},
                            {"test_count", r.test_count},
                            {"hyperparameters", hyper_json(cfg.method, r.hyper)},
                            {"confusion", confusion_json(r.confusion)},
                            {"model_sha256", codec::sha256_file(o.out)},
                            {"dataset_sha256", data_hash}};
  if (r.cv) {
    results["cv"] = {{"best", r.cv->best},
                     {"held_out_participants", r.cv->held_out},
                     {"mean_scores", r.cv->mean_scores},
                     {"fold_scores", r.cv->fold_scores}};
  }
  if (r.network) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.network->result.history)
      epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
    results["network"] = {{"fit_samples", r.network->fit_samples},
                          {"val_samples", r.network->val_samples},
                          {"epochs", epochs}};
  }
  const std::string results_path = or_default(o.results, o.out + ".results.json");
  write_json(results_path, results);

  auto m = manifest_base("train", config);
  m["config"]["data"] = o.data;
  m["config"]["out"] = o.out;
  m["seeds"] = {{"split", o.seed}, {"rf", r.hyper.rf.seed}, {"nn", r.hyper.nn.seed}};
  m["inputs"] = {{"data", artifact(o.data)}};
  m["outputs"] = {{"model", artifact(o.out)}, {"results", artifact(results_path)}};
  m["accuracy"] = r.accuracy;
  m["train_seconds"] = r.train_seconds;
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(or_default(o.manifest, o.out + ".manifest.json"), m);

  out << o.method << (o.augment ? " (augmented)" : "") << ": train " << r.train_count << " (fit on " << r.fit_count
      << "), test " << r.test_count << '\n';
  out << "hyperparameters " << hyper_json(cfg.method, r.hyper).dump() << '\n';
  out << format_confusion(r.confusion);
  return kExitOk;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Model model = Model::load(o.model);
  const auto raw = read_dataset(o.data);
  const std::string data_hash = codec::sha256_file(o.data);
  const auto prepared = prepare_all(raw);

  // The dataset the model was trained on is scored on its own held-out
  // partition; any other dataset is scored in full.
  std::vector<Recording> scored;
  std::string partition = "all";
  const auto& meta = model.metadata();
  if (meta.contains("training") && meta["training"].value("dataset_sha256", "") == data_hash) {
    const auto& t = meta["training"];
    scored = split(prepared, {t.at("train_fraction").get<double>(), t.at("seed").get<std::uint64_t>(), false}).test;
    partition = "test";
  } else {
    scored = prepared;
  }
  const auto cm = confusion(labels_of(scored), model.predict_prepared(scored));

  const nlohmann::json config = {{"model_sha256", codec::sha256_file(o.model)}, {"data_sha256", data_hash}};
  auto m = manifest_base("eval", config);
  m["config"]["model"] = o.model;
  m["config"]["data"] = o.data;
  m["inputs"] = {{"model", artifact(o.model)}, {"data", artifact(o.data)}};
  m["partition"] = partition;
  m["accuracy"] = cm.accuracy();
  m["confusion"] = confusion_json(cm);
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(or_default(o.manifest, o.model + ".eval.manifest.json"), m);

  out << "method " << name_of(model.method()) << ", " << scored.size() << " recordings (" << partition
      << " partition)\n";
  out << format_confusion(cm);
  return kExitOk;
}

inline int cmd_serve(const ServeOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  stop_flag().store(false);
  Model model;
  try {
    model = Model::load(o.model);
  } catch (const DataError& e) {
    throw StartupError(std::string("cannot load model: ") + e.what());
  }
  std::ofstream log(o.log, std::ios::app);
  if (!log) throw StartupError("cannot open log file " + o.log);

  std::mutex out_mutex;
  std::unique_ptr<WsServer> ws;
  std::atomic<WsServer*> ws_ready{nullptr};
  Recognizer rec(
      model,
      [&](const Prediction& p) {
        const std::string msg = prediction_json(p);
        if (auto* s = ws_ready.load()) s->broadcast(msg);
        std::lock_guard lock(out_mutex);
        out << "prediction " << name_of(label_of_id(p.label)) << " score " << std::fixed << std::setprecision(3)
            << p.scores[std::size_t(p.label)] << " segment_ms " << std::setprecision(0) << p.segment_ms
            << " latency_ms " << std::setprecision(2) << p.latency_ms << std::endl;
        log << msg << std::endl;
      },
      [&](bool active) {
        if (auto* s = ws_ready.load()) s->broadcast(state_json(active));
      });
  UdpListener udp(o.udp, [&](const Frame& f) { rec.push(f); });
  ws = std::make_unique<WsServer>(o.ws, [&](const Frame& f) { rec.push(f); });
  ws_ready.store(ws.get());

  const nlohmann::json config = {{"model_sha256", codec::sha256_file(o.model)}, {"udp", o.udp}, {"ws", o.ws}};
  auto m = manifest_base("serve", config);
  m["config"]["model"] = o.model;
  m["config"]["log"] = o.log;
  m["inputs"] = {{"model", artifact(o.model)}};
  m["listening"] = {{"udp", udp.port()}, {"ws", ws->port()}, {"ws_path", kWsPath}};
  const std::string manifest_path = or_default(o.manifest, o.log + ".manifest.json");
  write_json(manifest_path, m);
  {
    std::lock_guard lock(out_mutex);
    out << "serving " << name_of(model.method()) << ": OSC on udp/" << udp.port() << ", ws://0.0.0.0:" << ws->port()
        << kWsPath << std::endl;
  }

  auto on_signal = [](int) { request_stop(); };
  auto old_int = std::signal(SIGINT, on_signal);
  auto old_term = std::signal(SIGTERM, on_signal);
  const auto deadline = t0 + std::chrono::duration<double>(o.duration_s);
  while (!stop_flag().load() && (o.duration_s <= 0.0 || std::chrono::steady_clock::now() < deadline))
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);

  udp.stop();
  rec.stop();  // flushes the last open segment
  ws_ready.store(nullptr);
  ws->stop();

  const auto us = udp.stats();
  const auto rs = rec.stats();
  m["stats"] = {{"udp_frames", us.frames_ok},           {"udp_bad_packets", us.packets_bad},
                {"ws_frames", ws->frames_received()},   {"ws_bad_messages", ws->bad_messages()},
                {"segments", rs.segments},              {"predictions", rs.predictions},
                {"intake_overflows", rs.intake_overflows + us.queue_overflows},
                {"segment_overflows", rs.segment_overflows}};
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(manifest_path, m);
  std::lock_guard lock(out_mutex);
  out << "stopped: " << rs.frames << " frames, " << rs.segments << " segments, " << rs.predictions
      << " predictions, " << (rs.intake_overflows + us.queue_overflows) << " overflows" << std::endl;
  return kExitOk;
}

inline int cmd_replay(const ReplayOptions& o, std::ostream& out) {
  if (o.count < 1) throw DomainError("--count must be at least 1");
  if (o.gap < 0) throw DomainError("--gap must be non-negative");
  if (!(o.rate_hz > 0.0)) throw DomainError("--rate must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = read_dataset(o.data);
  if (ds.empty()) throw DataError("dataset " + o.data + " is empty");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(o.seed, 0x7265706c6179ULL));
  rng.shuffle(order.begin(), order.end());
  std::vector<Recording> picks;
  for (int i = 0; i < o.count; ++i) picks.push_back(ds[order[std::size_t(i) % order.size()]]);
  const auto stream = build_stream(picks, o.gap, o.seed);

  UdpSender sender(o.host, o.port);
  const auto period = std::chrono::duration<double>(1.0 / o.rate_hz);
  auto next = std::chrono::steady_clock::now();
  for (const auto& f : stream.frames) {
    std::this_thread::sleep_until(next);
    sender.send(osc::encode_frame(f));
    next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
  }

  const nlohmann::json config = {{"data_sha256", codec::sha256_file(o.data)}, {"count", o.count}, {"gap", o.gap},
                                 {"rate_hz", o.rate_hz},                     {"seed", o.seed}};
  auto m = manifest_base("replay", config);
  m["config"]["data"] = o.data;
  m["config"]["host"] = o.host;
  m["config"]["port"] = o.port;
  m["seeds"] = {{"selection", o.seed}};
  m["inputs"] = {{"data", artifact(o.data)}};
  nlohmann::json truth = nlohmann::json::array();
  for (const auto& t : stream.truth)
    truth.push_back({{"id", t.id}, {"label", std::string(name_of(label_of_id(t.label)))}, {"begin", t.begin},
                     {"end", t.end}});
  m["truth"] = truth;
  m["frames_sent"] = stream.frames.size();
  m["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(or_default(o.manifest, o.data + ".replay.manifest.json"), m);
  out << "sent " << stream.frames.size() << " frames (" << stream.truth.size() << " gestures) to " << o.host << ':'
      << o.port << '\n';
  return kExitOk;
}

/// Repeats a recorded generate/train/eval run with outputs under `out_dir`
/// and compares every recorded artifact hash and accuracy.
inline int cmd_rerun(const std::string& manifest_path, std::string out_dir, std::ostream& out) {
  const auto m = read_json(manifest_path);
  const std::string command = m.value("command", "");
  const auto& c = m.at("config");
  if (out_dir.empty())
    out_dir = (std::filesystem::temp_directory_path() / ("texyz-rerun-" + m.value("config_hash", "x").substr(0, 12)))
                  .string();
  std::filesystem::create_directories(out_dir);
  const auto in_dir = [&](const std::string& name) { return (std::filesystem::path(out_dir) / name).string(); };

  auto check_input = [&](const char* key) {
    const auto& rec = m.at("inputs").at(key);
    const std::string path = rec.at("path");
    if (codec::sha256_file(path) != rec.at("sha256").get<std::string>())
      throw DataError("input " + path + " changed since the manifest was written");
    return path;
  };

  std::vector<std::pair<std::string, bool>> checks;
  std::ostringstream sink;
  if (command == "generate") {
    GenerateOptions o;
    o.seed = c.at("seed");
    o.participants = c.at("participants");
    o.out = in_dir("dataset.jsonl");
    o.manifest = in_dir("dataset.manifest.json");
    cmd_generate(o, sink);
    checks.push_back({"dataset sha256", codec::sha256_file(o.out) == m["outputs"]["dataset"]["sha256"]});
  } else if (command == "train") {
    TrainOptions o;
    o.data = check_input("data");
    o.method = c.at("method");
    o.augment = c.at("augment");
    o.cv = c.at("cv");
    o.seed = c.at("seed");
    o.train_fraction = c.at("train_fraction");
    o.out = in_dir("model.json");
    o.results = in_dir("model.results.json");
    o.manifest = in_dir("model.manifest.json");
    cmd_train(o, sink);
    const auto again = read_json(o.manifest);
    checks.push_back({"accuracy", again.at("accuracy").get<double>() == m.at("accuracy").get<double>()});
    checks.push_back({"model sha256", again["outputs"]["model"]["sha256"] == m["outputs"]["model"]["sha256"]});
    checks.push_back({"results sha256", again["outputs"]["results"]["sha256"] == m["outputs"]["results"]["sha256"]});
  } else if (command == "eval") {
    EvalOptions o;
    o.model = check_input("model");
    o.data = check_input("data");
    o.manifest = in_dir("eval.manifest.json");
    cmd_eval(o, sink);
    const auto again = read_json(o.manifest);
    checks.push_back({"accuracy", again.at("accuracy").get<double>() == m.at("accuracy").get<double>()});
    checks.push_back({"confusion", again.at("confusion") == m.at("confusion")});
  } else {
    throw DomainError("cannot rerun a '" + command + "' manifest (only generate, train and eval are batch runs)");
  }
  bool all = true;
  for (const auto& [what, same] : checks) {
    out << (same ? "identical " : "DIFFERENT ") << what << '\n';
    all = all && same;
  }
  out << (all ? "rerun reproduced " : "rerun diverged from ") << manifest_path << " (outputs in " << out_dir << ")\n";
  return all ? kExitOk : kExitMismatch;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"texyz: tactile gesture recognition on a 9x9 textile pressure sensor"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string methods;
  for (Method m : kMethods) methods += (methods.empty() ? "" : "|") + std::string(name_of(m));

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic gesture dataset");
  g->add_option("--out", gen.out, "Dataset path (JSON lines)")->required();
  g->add_option("--seed", gen.seed, "Corpus seed");
  g->add_option("--participants", gen.participants, "Number of virtual participants (9 x 10 recordings each)");
  g->add_option("--manifest", gen.manifest, "Manifest path (default <out>.manifest.json)");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Split, optionally tune and augment, train and score one method");
  t->add_option("--data", tr.data, "Dataset path")->required();
  t->add_option("--method", tr.method, methods)->required();
  t->add_flag("--augment", tr.augment, "Augment the training partition by shifting");
  t->add_flag("--cv", tr.cv, "Choose hyperparameters by leave-one-subject-out search");
  t->add_option("--seed", tr.seed, "Split and model seed");
  t->add_option("--train-fraction", tr.train_fraction, "Training share of each class");
  t->add_option("--out", tr.out, "Model path")->required();
  t->add_option("--results", tr.results, "Results path (default <out>.results.json)");
  t->add_option("--manifest", tr.manifest, "Manifest path (default <out>.manifest.json)");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a saved model on a dataset");
  e->add_option("--model", ev.model, "Model path")->required();
  e->add_option("--data", ev.data, "Dataset path")->required();
  e->add_option("--manifest", ev.manifest, "Manifest path (default <model>.eval.manifest.json)");

  ServeOptions sv;
  auto* s = app.add_subcommand("serve", "Recognize gestures live from OSC/UDP and WebSocket clients");
  s->add_option("--model", sv.model, "Model path")->required();
  s->add_option("--udp", sv.udp, "OSC/UDP port");
  s->add_option("--ws", sv.ws, "WebSocket port (endpoint /stream)");
  s->add_option("--log", sv.log, "Prediction log (JSON lines, appended)");
  s->add_option("--duration", sv.duration_s, "Stop after this many seconds (0: run until interrupted)");
  s->add_option("--manifest", sv.manifest, "Manifest path (default <log>.manifest.json)");

  ReplayOptions rp;
  auto* r = app.add_subcommand("replay", "Stream dataset gestures as OSC frames over UDP");
  r->add_option("--data", rp.data, "Dataset path")->required();
  r->add_option("--host", rp.host, "Destination host (IPv4)");
  r->add_option("--port", rp.port, "Destination UDP port");
  r->add_option("--count", rp.count, "Number of gestures");
  r->add_option("--gap", rp.gap, "Silent frames between gestures");
  r->add_option("--rate", rp.rate_hz, "Frames per second");
  r->add_option("--seed", rp.seed, "Selection and noise seed");
  r->add_option("--manifest", rp.manifest, "Manifest path (default <data>.replay.manifest.json)");

  std::string rerun_manifest, rerun_dir;
  auto* rr = app.add_subcommand("rerun", "Repeat a generate/train/eval manifest and compare artifacts");
  rr->add_option("--manifest", rerun_manifest, "Manifest to repeat")->required();
  rr->add_option("--out-dir", rerun_dir, "Where to write the repeated outputs");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (s->parsed()) return cmd_serve(sv, out);
    if (r->parsed()) return cmd_replay(rp, out);
    return cmd_rerun(rerun_manifest, rerun_dir, out);
  } catch (const DomainError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const StartupError& ex) {
    err << "startup error: " << ex.what() << '\n';
    return kExitData;
  } catch (const Error& ex) {
    err << "data error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "data error: " << ex.what() << '\n';
    return kExitData;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace texyz::cli
