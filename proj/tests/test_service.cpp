#include <catch_amalgamated.hpp>

#include "texyz/osc.hpp"
#include "texyz/service.hpp"
#include "texyz/synth.hpp"
#include "texyz/udp.hpp"

using namespace texyz;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

struct Fixture {
  std::vector<Recording> corpus;
  Model model;
};

const Fixture& fixture() {
  static const Fixture fx = [] {
    SynthSpec spec;
    spec.participants = 6;
    Fixture f;
    f.corpus = synth_dataset(spec, 8);
    Hyper h = paper_hyper(Method::tp_rf, false, 1);
    h.rf.n_estimators = 60;
    f.model = Model::fit(Method::tp_rf, h, prepare_all(f.corpus));
    return f;
  }();
  return fx;
}

LabeledStream stream_of(std::size_t n, std::uint64_t seed) {
  const auto& c = fixture().corpus;
  std::vector<Recording> picks;
  for (std::size_t i = 0; i < n; ++i) picks.push_back(c[(i * 37 + seed) % c.size()]);
  return build_stream(picks, 30, seed);
}

std::string frame_message(const Frame& f) {
  nlohmann::json j;
  j["type"] = "frame";
  j["t"] = f.timestamp_ms;
  j["p"] = f.p;
  return j.dump();
}

}  // namespace

TEST_CASE("prediction and state messages") {
  Prediction p;
  p.label = id_of_label(Gesture::circle_cw);
  p.scores.fill(0.05);
  p.scores[std::size_t(p.label)] = 0.55;
  p.segment_ms = 1200;
  p.latency_ms = 3.5;
  const auto j = nlohmann::json::parse(prediction_json(p));
  CHECK(j["type"] == "prediction");
  CHECK(j["label"] == "circle_cw");
  CHECK(j["scores"].size() == std::size_t(kNumClasses));
  double sum = 0;
  for (const auto& [k, v] : j["scores"].items()) sum += v.get<double>();
  CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  CHECK(j["segment_ms"] == 1200.0);
  CHECK(j["latency_ms"] == 3.5);
  CHECK(nlohmann::json::parse(state_json(true)) == nlohmann::json{{"type", "state"}, {"active", true}});
}

TEST_CASE("client frame messages") {
  Frame f;
  f.timestamp_ms = 1234;
  for (int i = 0; i < kTaxels; ++i) f.p[std::size_t(i)] = i / 81.0;
  const Frame back = parse_client_frame(frame_message(f));
  CHECK(back.timestamp_ms == 1234);
  CHECK(back.p == f.p);

  nlohmann::json j = nlohmann::json::parse(frame_message(f));
  j["p"][0] = 1.7;
  j["p"][1] = -0.2;
  const Frame clamped = parse_client_frame(j.dump());
  CHECK(clamped.p[0] == 1.0);
  CHECK(clamped.p[1] == 0.0);

  CHECK_THROWS_AS(parse_client_frame("not json"), SchemaError);
  CHECK_THROWS_AS(parse_client_frame(R"({"type":"hello"})"), SchemaError);
  j = nlohmann::json::parse(frame_message(f));
  j["p"].erase(0);
  CHECK_THROWS_AS(parse_client_frame(j.dump()), SchemaError);
  j = nlohmann::json::parse(frame_message(f));
  j["p"][5] = "x";
  CHECK_THROWS_AS(parse_client_frame(j.dump()), SchemaError);
}

TEST_CASE("the recognizer emits one prediction per streamed gesture") {
  const auto s = stream_of(20, 2);
  std::mutex mu;
  std::vector<Prediction> got;
  std::vector<bool> states;
  {
    Recognizer rec(
        fixture().model,
        [&](const Prediction& p) {
          std::lock_guard lock(mu);
          got.push_back(p);
        },
        [&](bool a) {
          std::lock_guard lock(mu);
          states.push_back(a);
        });
    for (const auto& f : s.frames) {
      rec.push(f);
      std::this_thread::sleep_for(std::chrono::microseconds(500));
    }
    rec.stop();
    const auto st = rec.stats();
    CHECK(st.frames == s.frames.size());
    CHECK(st.intake_overflows == 0);
    CHECK(st.segment_overflows == 0);
    CHECK(st.predictions == got.size());
  }
  REQUIRE(got.size() == s.truth.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    correct += got[i].label == s.truth[i].label;
    double sum = 0;
    for (double v : got[i].scores) sum += v;
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    CHECK(got[i].segment_ms > 0);
    CHECK(got[i].latency_ms >= 0);
  }
  CHECK(correct >= 14);
  // Every gesture toggles the state on and then off.
  REQUIRE(states.size() == 2 * s.truth.size());
  for (std::size_t i = 0; i < states.size(); ++i) CHECK(states[i] == (i % 2 == 0));
}

TEST_CASE("WebSocket clients stream frames and receive predictions") {
  const auto s = stream_of(3, 5);
  std::unique_ptr<WsServer> server;
  Recognizer rec(
      fixture().model, [&](const Prediction& p) { server->broadcast(prediction_json(p)); },
      [&](bool a) { server->broadcast(state_json(a)); });
  server = std::make_unique<WsServer>(0, [&](const Frame& f) { rec.push(f); });
  CHECK_THROWS_AS(WsServer(server->port(), {}), StartupError);

  boost::asio::io_context io;
  tcp::resolver resolver(io);
  websocket::stream<tcp::socket> ws(io);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server->port())));
  ws.handshake("127.0.0.1", kWsPath);
  for (int i = 0; i < 200 && server->clients() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  REQUIRE(server->clients() == 1);

  ws.text(true);
  ws.write(boost::asio::buffer(std::string("{\"type\":\"frame\"}")));
  for (const auto& f : s.frames) ws.write(boost::asio::buffer(frame_message(f)));

  std::vector<nlohmann::json> msgs;
  std::size_t predictions = 0;
  while (predictions < s.truth.size()) {
    beast::flat_buffer buf;
    ws.read(buf);
    msgs.push_back(nlohmann::json::parse(beast::buffers_to_string(buf.data())));
    predictions += msgs.back()["type"] == "prediction";
  }
  CHECK(server->frames_received() == s.frames.size());
  CHECK(server->bad_messages() == 1);
  CHECK(msgs.front() == nlohmann::json{{"type", "state"}, {"active", true}});
  std::size_t states = 0;
  for (const auto& m : msgs)
    if (m["type"] == "state") ++states;
    else CHECK(m["scores"].size() == std::size_t(kNumClasses));
  CHECK(states >= 2 * s.truth.size() - 1);

  ws.close(websocket::close_code::normal);
  server->stop();
  rec.stop();
}

TEST_CASE("requests outside the stream path are refused") {
  WsServer server(0, {});
  boost::asio::io_context io;
  tcp::resolver resolver(io);
  websocket::stream<tcp::socket> ws(io);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  CHECK_THROWS(ws.handshake("127.0.0.1", "/other"));
}

TEST_CASE("UDP and WebSocket inputs feed the same recognizer") {
  const auto s = stream_of(4, 9);
  std::atomic<int> predictions{0};
  Recognizer rec(fixture().model, [&](const Prediction&) { ++predictions; });
  UdpListener udp(0, [&](const Frame& f) { rec.push(f); });
  UdpSender send("127.0.0.1", udp.port());
  for (const auto& f : s.frames) {
    send.send(osc::encode_frame(f));
    std::this_thread::sleep_for(std::chrono::microseconds(800));
  }
  for (int i = 0; i < 400 && udp.stats().frames_ok < s.frames.size(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  udp.stop();
  rec.stop();
  CHECK(udp.stats().frames_ok == s.frames.size());
  CHECK(predictions.load() == int(s.truth.size()));
}
