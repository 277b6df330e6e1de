#pragma once

// Live recognition: frames from UDP (OSC) and WebSocket clients share one
// queue; a segmenter thread cuts gestures and a separate worker classifies
// them so intake never waits on a model.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "texyz/eval.hpp"
#include "texyz/frame_queue.hpp"
#include "texyz/methods.hpp"

namespace texyz {

inline constexpr std::uint16_t kDefaultWsPort = 8080;
inline constexpr const char* kWsPath = "/stream";

struct Prediction {
  int label = 0;
  std::array<double, kNumClasses> scores{};
  double segment_ms = 0.0;  // duration covered by the segment's frames
  double latency_ms = 0.0;  // segment emitted -> prediction ready
  std::int64_t start_ms = 0;
  std::size_t frames = 0;
};

inline std::string prediction_json(const Prediction& p) {
  nlohmann::json j;
  j["type"] = "prediction";
  j["label"] = std::string(name_of(label_of_id(p.label)));
  auto& s = j["scores"] = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) s[std::string(name_of(label_of_id(c)))] = p.scores[std::size_t(c)];
  j["segment_ms"] = p.segment_ms;
  j["latency_ms"] = p.latency_ms;
  return j.dump();
}

inline std::string state_json(bool active) { return nlohmann::json{{"type", "state"}, {"active", active}}.dump(); }

/// Parses a client message {type:"frame", t, p[81]}. Values are clamped to
/// [0, 1] as the pad promises; anything else is a SchemaError.
inline Frame parse_client_frame(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("frame message is not JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "frame") throw SchemaError("message type is not 'frame'");
  if (!j.contains("p") || !j["p"].is_array() || j["p"].size() != std::size_t(kTaxels))
    throw SchemaError("frame message needs 81 pressure values");
  Frame f;
  for (std::size_t i = 0; i < f.p.size(); ++i) {
    if (!j["p"][i].is_number()) throw SchemaError("pressure value " + std::to_string(i) + " is not a number");
    const double v = j["p"][i].get<double>();
    f.p[i] = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  }
  if (j.contains("t") && j["t"].is_number()) f.timestamp_ms = j["t"].get<std::int64_t>();
  return f;
}

// ---------------------------------------------------------------------------
// Recognizer

struct RecognizerStats {
  std::uint64_t frames = 0;
  std::uint64_t segments = 0;
  std::uint64_t predictions = 0;
  std::uint64_t intake_overflows = 0;
  std::uint64_t segment_overflows = 0;
};

class Recognizer {
 public:
  using PredictionSink = std::function<void(const Prediction&)>;
  using StateSink = std::function<void(bool)>;

  Recognizer(const Model& model, PredictionSink on_prediction, StateSink on_state = {}, SegmenterConfig cfg = {},
             std::size_t intake_capacity = 256)
      : model_(model),
        on_prediction_(std::move(on_prediction)),
        on_state_(std::move(on_state)),
        segmenter_(cfg),
        frames_(intake_capacity),
        segments_(16) {
    segment_thread_ = std::thread([this] { segment_loop(); });
    classify_thread_ = std::thread([this] { classify_loop(); });
  }

  Recognizer(const Recognizer&) = delete;
  Recognizer& operator=(const Recognizer&) = delete;
  ~Recognizer() { stop(); }

  void push(const Frame& f) { frames_.push(f); }

  /// Drains pending frames, emits any open segment, and joins the workers.
  void stop() {
    if (stopped_.exchange(true)) return;
    frames_.close();
    if (segment_thread_.joinable()) segment_thread_.join();
    segments_.close();
    if (classify_thread_.joinable()) classify_thread_.join();
  }

  RecognizerStats stats() const {
    RecognizerStats s;
    s.frames = frames_in_.load();
    s.segments = segments_out_.load();
    s.predictions = predictions_.load();
    s.intake_overflows = frames_.overflows();
    s.segment_overflows = segments_.overflows();
    return s;
  }

 private:
  struct Pending {
    Recording segment;
    std::chrono::steady_clock::time_point emitted;
  };

  void segment_loop() {
    bool was_active = false;
    auto handle = [&](std::optional<Recording> seg) {
      if (seg) {
        ++segments_out_;
        segments_.push({std::move(*seg), std::chrono::steady_clock::now()});
      }
      const bool now_active = segmenter_.active();
      if (now_active != was_active && on_state_) on_state_(now_active);
      was_active = now_active;
    };
    for (;;) {
      auto f = frames_.pop(std::chrono::milliseconds(50));
      if (f) {
        ++frames_in_;
        handle(segmenter_.feed(*f));
        continue;
      }
      if (frames_.closed()) {
        while (auto rest = frames_.try_pop()) {
          ++frames_in_;
          handle(segmenter_.feed(*rest));
        }
        handle(segmenter_.flush());
        return;
      }
    }
  }

  void classify_loop() {
    for (;;) {
      auto p = segments_.pop(std::chrono::milliseconds(50));
      if (!p) {
        if (segments_.closed()) {
          while (auto rest = segments_.try_pop()) classify(*rest);
          return;
        }
        continue;
      }
      classify(*p);
    }
  }

  void classify(const Pending& p) {
    Prediction out;
    const Recording& seg = p.segment;
    out.scores = model_.scores(seg);
    out.label = model_.predict(seg);
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - p.emitted).count();
    out.frames = seg.frames.size();
    out.start_ms = seg.frames.front().timestamp_ms;
    out.segment_ms = static_cast<double>(seg.frames.size()) * 1000.0 / seg.rate_hz;
    ++predictions_;
    if (on_prediction_) on_prediction_(out);
  }

  const Model& model_;
  PredictionSink on_prediction_;
  StateSink on_state_;
  Segmenter segmenter_;
  BoundedQueue<Frame> frames_;
  BoundedQueue<Pending> segments_;
  std::atomic<bool> stopped_{false};
  std::atomic<std::uint64_t> frames_in_{0}, segments_out_{0}, predictions_{0};
  std::thread segment_thread_, classify_thread_;
};

// ---------------------------------------------------------------------------
// WebSocket endpoint

namespace ws_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

class Hub;

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

  void start();
  void send(std::shared_ptr<const std::string> text) {
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write_next();
  }
  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_request(beast::error_code ec);
  void on_read(beast::error_code ec, std::size_t);
  void write_next();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  Hub& hub_;
};

/// Shared state touched only on the io_context thread.
class Hub {
 public:
  using FrameSink = std::function<void(const Frame&)>;
  explicit Hub(FrameSink sink) : sink_(std::move(sink)) {}

  void join(const std::shared_ptr<Session>& s) { sessions_.insert(s); }
  void leave(const std::shared_ptr<Session>& s) { sessions_.erase(s); }
  void frame(const Frame& f) {
    ++frames_;
    if (sink_) sink_(f);
  }
  void bad_message() { ++bad_; }
  void broadcast(const std::shared_ptr<const std::string>& text) {
    for (const auto& s : sessions_) s->send(text);
  }
  void close_all() {
    for (const auto& s : sessions_) s->close();
    sessions_.clear();
  }
  std::size_t clients() const { return sessions_.size(); }

  std::atomic<std::uint64_t> frames_{0}, bad_{0};

 private:
  FrameSink sink_;
  std::set<std::shared_ptr<Session>> sessions_;
};

inline void Session::start() {
  // Read the upgrade request first so the path can be checked.
  http::async_read(ws_.next_layer(), buffer_, request_,
                   [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
}

inline void Session::on_request(beast::error_code ec) {
  if (ec) return;
  if (!websocket::is_upgrade(request_) || request_.target() != kWsPath) {
    auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
    res->set(http::field::content_type, "text/plain");
    res->body() = "websocket endpoint is " + std::string(kWsPath) + "\n";
    res->prepare_payload();
    http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      self->close();
    });
    return;
  }
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(request_, [self = shared_from_this()](beast::error_code e) {
    if (e) return;
    self->hub_.join(self);
    self->buffer_.clear();
    self->ws_.async_read(self->buffer_, [self](beast::error_code ec2, std::size_t n) { self->on_read(ec2, n); });
  });
}

inline void Session::on_read(beast::error_code ec, std::size_t) {
  if (ec) {
    hub_.leave(shared_from_this());
    return;
  }
  try {
    hub_.frame(parse_client_frame(beast::buffers_to_string(buffer_.data())));
  } catch (const SchemaError&) {
    hub_.bad_message();
  }
  buffer_.consume(buffer_.size());
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code e, std::size_t n) { self->on_read(e, n); });
}

inline void Session::write_next() {
  ws_.text(true);
  ws_.async_write(asio::buffer(*outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->outbox_.clear();
      self->hub_.leave(self);
      return;
    }
    self->outbox_.pop_front();
    if (!self->outbox_.empty()) self->write_next();
  });
}

}  // namespace ws_detail

/// WebSocket server on ws://host:port/stream. Incoming frame messages go to
/// `on_frame` (called on the server thread); broadcast() is thread-safe.
class WsServer {
 public:
  using FrameSink = std::function<void(const Frame&)>;

  WsServer(std::uint16_t port, FrameSink on_frame) : hub_(std::move(on_frame)), acceptor_(io_) {
    namespace asio = boost::asio;
    boost::system::error_code ec;
    const asio::ip::tcp::endpoint ep(asio::ip::tcp::v4(), port);
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw StartupError("cannot listen for WebSocket clients on port " + std::to_string(port) + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;
  ~WsServer() { stop(); }

  std::uint16_t port() const { return port_; }

  void broadcast(std::string text) {
    auto shared = std::make_shared<const std::string>(std::move(text));
    boost::asio::post(io_, [this, shared] { hub_.broadcast(shared); });
  }

  std::size_t clients() {
    std::promise<std::size_t> p;
    auto f = p.get_future();
    boost::asio::post(io_, [&] { p.set_value(hub_.clients()); });
    return f.get();
  }

  std::uint64_t frames_received() const { return hub_.frames_.load(); }
  std::uint64_t bad_messages() const { return hub_.bad_.load(); }

  void stop() {
    if (stopped_.exchange(true)) return;
    boost::asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      hub_.close_all();
    });
    // Give pending writes a moment, then stop the loop.
    boost::asio::post(io_, [this] { io_.stop(); });
    if (thread_.joinable()) thread_.join();
  }

 private:
  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, boost::asio::ip::tcp::socket socket) {
      if (ec) return;
      std::make_shared<ws_detail::Session>(std::move(socket), hub_)->start();
      accept();
    });
  }

  boost::asio::io_context io_;
  ws_detail::Hub hub_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopped_{false};
  std::thread thread_;
};

}  // namespace texyz
