#include <catch_amalgamated.hpp>

#include <cstring>

#include "texyz/codec.hpp"
#include "texyz/osc.hpp"
#include "texyz/rng.hpp"
#include "oracles.hpp"

using namespace texyz;
using oracle::uniform_frame;

TEST_CASE("encode_frame produces the OSC 1.0 layout") {
  Frame zero;
  const auto bytes = osc::encode_frame(zero);
  CHECK(bytes.size() == 16 + 84 + 324);
  CHECK(bytes.size() % 4 == 0);
  CHECK(bytes == oracle::frame_packet(zero));

  Frame one;
  one.p[0] = 1.0;
  const auto b1 = osc::encode_frame(one);
  CHECK(b1[100] == 0x3F);
  CHECK(b1[101] == 0x80);
  CHECK(b1[102] == 0x00);
  CHECK(b1[103] == 0x00);
}

TEST_CASE("a single uniform frame round-trips") {
  const auto parsed = osc::parse_packet(osc::encode_frame(uniform_frame(0.5)), 42);
  REQUIRE(parsed.frames.size() == 1);
  CHECK(parsed.frames[0].timestamp_ms == 42);
  for (double v : parsed.frames[0].p) CHECK(v == 0.5);
  CHECK(parsed.ignored == 0);
}

TEST_CASE("a bundle of two frames parses in order and matches the golden bytes") {
  Frame a = uniform_frame(0.25), b = uniform_frame(0.75);
  b.p[80] = 1.0;
  std::vector<std::vector<std::uint8_t>> elems = {osc::encode_frame(a), osc::encode_frame(b)};
  const auto bundle = osc::encode_bundle(elems);

  const auto golden = oracle::golden_bundle(a, b);
  CHECK(bundle.size() == 872);
  CHECK(bundle == golden);
  CHECK(codec::sha256_hex(bundle) == codec::sha256_hex(golden));

  const auto parsed = osc::parse_packet(bundle);
  REQUIRE(parsed.frames.size() == 2);
  CHECK(parsed.frames[0].p[0] == 0.25);
  CHECK(parsed.frames[1].p[80] == 1.0);
  CHECK(parsed.frames[1].p[0] == 0.75);
}

TEST_CASE("nested bundles unwrap and foreign addresses are skipped") {
  const std::int32_t args[] = {1, 2};
  std::vector<std::vector<std::uint8_t>> inner = {osc::encode_frame(uniform_frame(0.1)),
                                                  osc::encode_message("/texyz/touch", args)};
  std::vector<std::vector<std::uint8_t>> outer = {osc::encode_bundle(inner), osc::encode_frame(uniform_frame(0.2))};
  const auto parsed = osc::parse_packet(osc::encode_bundle(outer));
  REQUIRE(parsed.frames.size() == 2);
  CHECK(parsed.frames[0].p[0] == Catch::Approx(0.1).epsilon(1e-6));
  CHECK(parsed.frames[1].p[0] == Catch::Approx(0.2).epsilon(1e-6));
  CHECK(parsed.ignored == 1);
}

TEST_CASE("negative and non-finite raw floats clamp to zero") {
  Frame f = uniform_frame(0.3);
  f.p[0] = -2.0;
  f.p[1] = 3.5;
  auto bytes = osc::encode_frame(f);
  // Overwrite taxel 2 with a quiet NaN.
  bytes[108] = 0x7F;
  bytes[109] = 0xC0;
  bytes[110] = 0;
  bytes[111] = 0;
  const auto parsed = osc::parse_packet(bytes);
  CHECK(parsed.frames[0].p[0] == 0.0);
  CHECK(parsed.frames[0].p[1] == 3.5);
  CHECK(parsed.frames[0].p[2] == 0.0);
  CHECK(is_valid(parsed.frames[0]));
}

TEST_CASE("malformed packets report the failing offset") {
  auto bytes = osc::encode_frame(uniform_frame(0.5));

  SECTION("truncated after the type-tag string") {
    bytes.resize(100);
    try {
      osc::parse_packet(bytes);
      FAIL("expected a parse error");
    } catch (const osc::ParseError& e) {
      CHECK(e.offset == 100);
    }
  }
  SECTION("non-zero padding byte") {
    bytes[13] = 'x';
    try {
      osc::parse_packet(bytes);
      FAIL("expected a parse error");
    } catch (const osc::ParseError& e) {
      CHECK(e.offset == 13);
    }
  }
  SECTION("wrong type tag") {
    bytes[20] = 'i';
    try {
      osc::parse_packet(bytes);
      FAIL("expected a parse error");
    } catch (const osc::ParseError& e) {
      CHECK(e.offset == 16);
    }
  }
  SECTION("length not 4-aligned") {
    bytes.push_back(0);
    CHECK_THROWS_AS(osc::parse_packet(bytes), osc::ParseError);
  }
  SECTION("empty packet") {
    CHECK_THROWS_AS(osc::parse_packet(std::vector<std::uint8_t>{}), osc::ParseError);
  }
}

TEST_CASE("round-trip property over random frames") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    Frame f;
    for (double& v : f.p) v = rng.uniform();
    const auto parsed = osc::parse_packet(osc::encode_frame(f));
    REQUIRE(parsed.frames.size() == 1);
    for (int i = 0; i < kTaxels; ++i) REQUIRE(std::abs(parsed.frames[0].p[size_t(i)] - f.p[size_t(i)]) <= 0x1p-20);
  }
}

TEST_CASE("mutated packets either parse to valid frames or raise ParseError") {
  Rng rng(5);
  const Frame a = uniform_frame(0.4);
  std::vector<std::vector<std::uint8_t>> elems = {osc::encode_frame(a), osc::encode_frame(a)};
  const auto base = osc::encode_bundle(elems);
  for (int trial = 0; trial < 3000; ++trial) {
    auto m = base;
    const int edits = rng.range(1, 4);
    for (int e = 0; e < edits; ++e) {
      switch (rng.range(0, 2)) {
        case 0: m[rng.below(m.size())] = static_cast<std::uint8_t>(rng.below(256)); break;
        case 1: m.resize(rng.below(m.size() + 1)); break;
        default: m.insert(m.begin() + std::ptrdiff_t(rng.below(m.size() + 1)), static_cast<std::uint8_t>(rng.below(256)));
      }
      if (m.empty()) break;
    }
    try {
      for (const auto& f : osc::parse_packet(m).frames) REQUIRE(is_valid(f));
    } catch (const osc::ParseError&) {
    }
  }
}
