#include <catch_amalgamated.hpp>

#include <sys/socket.h>

#include "texyz/cli.hpp"

using namespace texyz;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome texyz_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("texyz_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

// A port the kernel just handed out and released.
std::uint16_t free_port(int type) {
  const int fd = ::socket(AF_INET, type, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

std::size_t count_lines_starting(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST_CASE("generate writes the expected corpus size and is deterministic") {
  TempDir d;
  REQUIRE(texyz_cli({"generate", "--out", d / "a.jsonl", "--participants", "2", "--seed", "7"}).code == 0);
  REQUIRE(texyz_cli({"generate", "--out", d / "b.jsonl", "--participants", "2", "--seed", "7"}).code == 0);
  CHECK(read_dataset(d / "a.jsonl").size() == 180);
  CHECK(codec::sha256_file(d / "a.jsonl") == codec::sha256_file(d / "b.jsonl"));
  const auto m = cli::read_json(d / "a.jsonl.manifest.json");
  CHECK(m["command"] == "generate");
  CHECK(m["outputs"]["dataset"]["sha256"] == codec::sha256_file(d / "a.jsonl"));
  CHECK(m["records"] == 180);
  CHECK(SynthSpec{}.total() == 3060);
}

TEST_CASE("usage and data errors map to their exit codes") {
  TempDir d;
  CHECK(texyz_cli({}).code == cli::kExitUsage);
  CHECK(texyz_cli({"frobnicate"}).code == cli::kExitUsage);
  CHECK(texyz_cli({"train", "--data", "x"}).code == cli::kExitUsage);
  CHECK(texyz_cli({"generate", "--out", d / "x.jsonl", "--participants", "0"}).code == cli::kExitUsage);
  CHECK(texyz_cli({"--help"}).code == cli::kExitOk);

  REQUIRE(texyz_cli({"generate", "--out", d / "ds.jsonl", "--participants", "2"}).code == 0);
  const auto unknown = texyz_cli({"train", "--data", d / "ds.jsonl", "--method", "mlp", "--out", d / "m.json"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK_THAT(unknown.err, Catch::Matchers::ContainsSubstring("unknown method"));
  CHECK(texyz_cli({"train", "--data", d / "missing.jsonl", "--method", "tp-rf", "--out", d / "m.json"}).code ==
        cli::kExitData);
  CHECK(texyz_cli({"generate", "--out", "/nonexistent/dir/ds.jsonl"}).code == cli::kExitData);

  write_text_file(d / "empty.jsonl", "");
  const auto empty = texyz_cli({"train", "--data", d / "empty.jsonl", "--method", "lstm", "--out", d / "m.json"});
  CHECK(empty.code == cli::kExitData);
  CHECK_THAT(empty.err, Catch::Matchers::ContainsSubstring("empty"));

  const auto no_model = texyz_cli({"serve", "--model", d / "missing.json", "--duration", "0.1"});
  CHECK(no_model.code == cli::kExitData);
  CHECK_THAT(no_model.err, Catch::Matchers::ContainsSubstring("startup error"));
}

TEST_CASE("train, eval and rerun agree exactly") {
  TempDir d;
  REQUIRE(texyz_cli({"generate", "--out", d / "ds.jsonl", "--participants", "3", "--seed", "4"}).code == 0);
  const auto tr = texyz_cli({"train", "--data", d / "ds.jsonl", "--method", "tp-rf", "--augment", "--out", d / "m.json"});
  REQUIRE(tr.code == 0);
  const auto results = cli::read_json(d / "m.json.results.json");
  CHECK(results.contains("accuracy"));
  CHECK(results["augment"] == true);
  CHECK(results["fit_count"].get<int>() > results["train_count"].get<int>());
  CHECK(results["model_sha256"] == codec::sha256_file(d / "m.json"));

  const auto ev = texyz_cli({"eval", "--model", d / "m.json", "--data", d / "ds.jsonl"});
  REQUIRE(ev.code == 0);
  const auto em = cli::read_json(d / "m.json.eval.manifest.json");
  CHECK(em["partition"] == "test");
  CHECK(em["accuracy"].get<double>() == results["accuracy"].get<double>());
  CHECK(em["confusion"] == results["confusion"]);

  // A different dataset is scored in full.
  REQUIRE(texyz_cli({"generate", "--out", d / "other.jsonl", "--participants", "1", "--seed", "9"}).code == 0);
  REQUIRE(texyz_cli({"eval", "--model", d / "m.json", "--data", d / "other.jsonl", "--manifest", d / "o.json"}).code ==
          0);
  CHECK(cli::read_json(d / "o.json")["partition"] == "all");

  const auto rr = texyz_cli({"rerun", "--manifest", d / "m.json.manifest.json", "--out-dir", d / "rerun"});
  CHECK(rr.code == 0);
  CHECK(count_lines_starting(rr.out, "identical ") == 3);
  const auto rg = texyz_cli({"rerun", "--manifest", d / "ds.jsonl.manifest.json", "--out-dir", d / "rerun_gen"});
  CHECK(rg.code == 0);
  const auto re = texyz_cli({"rerun", "--manifest", d / "m.json.eval.manifest.json", "--out-dir", d / "rerun_eval"});
  CHECK(re.code == 0);

  // Tampering with a recorded hash is reported as a divergence.
  auto m = cli::read_json(d / "m.json.manifest.json");
  m["outputs"]["model"]["sha256"] = std::string(64, '0');
  cli::write_json(d / "tampered.json", m);
  CHECK(texyz_cli({"rerun", "--manifest", d / "tampered.json", "--out-dir", d / "rerun2"}).code ==
        cli::kExitMismatch);
  // A changed input is a data error, not a silent rerun on other data.
  REQUIRE(texyz_cli({"generate", "--out", d / "ds.jsonl", "--participants", "3", "--seed", "5"}).code == 0);
  CHECK(texyz_cli({"rerun", "--manifest", d / "m.json.manifest.json", "--out-dir", d / "rerun3"}).code ==
        cli::kExitData);
}

TEST_CASE("cross-validated st-svm records its chosen grid point") {
  TempDir d;
  REQUIRE(texyz_cli({"generate", "--out", d / "ds.jsonl", "--participants", "5", "--seed", "3"}).code == 0);
  const auto tr = texyz_cli({"train", "--data", d / "ds.jsonl", "--method", "st-svm", "--cv", "--out", d / "m.json"});
  REQUIRE(tr.code == 0);
  const auto r = cli::read_json(d / "m.json.results.json");
  const auto grid = cv_grid(Method::st_svm, 1);
  const double log2c = r["hyperparameters"]["log2_C"], log2g = r["hyperparameters"]["log2_gamma"];
  CHECK(std::any_of(grid.begin(), grid.end(), [&](const Hyper& h) {
    return std::log2(h.svm.C) == log2c && std::log2(h.svm.gamma) == log2g;
  }));
  CHECK(r["cv"]["mean_scores"].size() == grid.size());
  CHECK(r["cv"]["held_out_participants"].size() == 5);
}

TEST_CASE("serve answers a replayed OSC stream with one line per gesture") {
  TempDir d;
  REQUIRE(texyz_cli({"generate", "--out", d / "ds.jsonl", "--participants", "2", "--seed", "6"}).code == 0);
  REQUIRE(texyz_cli({"train", "--data", d / "ds.jsonl", "--method", "tp-knn", "--out", d / "m.json"}).code == 0);
  const auto udp = std::to_string(free_port(SOCK_DGRAM)), ws = std::to_string(free_port(SOCK_STREAM));

  Outcome served{};
  std::thread server([&] {
    served = texyz_cli({"serve", "--model", d / "m.json", "--udp", udp, "--ws", ws, "--log", d / "serve.log",
                        "--duration", "120"});
  });
  for (int i = 0; i < 500 && !fs::exists(d / "serve.log.manifest.json"); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(fs::exists(d / "serve.log.manifest.json"));

  // A second server on the same ports fails at startup.
  const auto clash = texyz_cli({"serve", "--model", d / "m.json", "--udp", udp, "--ws", ws, "--log", d / "b.log"});
  CHECK(clash.code == cli::kExitData);

  const auto rp = texyz_cli({"replay", "--data", d / "ds.jsonl", "--port", udp, "--count", "20", "--rate", "150"});
  CHECK(rp.code == 0);
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  cli::request_stop();
  server.join();

  CHECK(served.code == 0);
  CHECK(count_lines_starting(served.out, "prediction ") == 20);
  const auto m = cli::read_json(d / "serve.log.manifest.json");
  CHECK(m["stats"]["predictions"] == 20);
  CHECK(m["stats"]["intake_overflows"] == 0);
  std::ifstream log(d / "serve.log");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["type"] == "prediction");
  }
  CHECK(lines == 20);
}
