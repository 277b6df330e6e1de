#pragma once

// OSC 1.0 framing for sensor frames: address "/texyz/frame", type tag ","
// followed by 81 'f', then 81 big-endian float32 pressures in storage order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "texyz/core.hpp"

namespace texyz::osc {

inline constexpr std::string_view kFrameAddress = "/texyz/frame";
inline constexpr std::string_view kBundleTag = "#bundle";
inline constexpr int kMaxBundleDepth = 8;

struct ParseError : DataError {
  ParseError(const std::string& what, std::size_t at)
      : DataError(what + " at byte offset " + std::to_string(at)), offset(at) {}
  std::size_t offset;
};

struct ParseResult {
  std::vector<Frame> frames;
  std::size_t ignored = 0;  // well-formed messages with other addresses
};

namespace detail {

inline std::size_t padded(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

inline void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
  const std::size_t total = padded(s.size() + 1);
  out.insert(out.end(), total - s.size(), std::uint8_t{0});
}

// Reads a NUL-terminated, zero-padded OSC string starting at `at` and
// returns it; `at` is advanced past the padding.
inline std::string_view read_string(std::span<const std::uint8_t> b, std::size_t& at, std::size_t end) {
  const std::size_t start = at;
  std::size_t nul = start;
  while (nul < end && b[nul] != 0) ++nul;
  if (nul >= end) throw ParseError("unterminated string", start);
  const std::size_t next = start + padded(nul - start + 1);
  if (next > end) throw ParseError("truncated string padding", nul);
  for (std::size_t i = nul; i < next; ++i)
    if (b[i] != 0) throw ParseError("misaligned string padding", i);
  at = next;
  return {reinterpret_cast<const char*>(b.data() + start), nul - start};
}

inline double clamp_raw(float v) {
  if (!std::isfinite(v) || v < 0.0f) return 0.0;
  return static_cast<double>(v);
}

inline void parse_element(std::span<const std::uint8_t> b, std::size_t begin, std::size_t end, int depth,
                          ParseResult& out, std::int64_t stamp_ms) {
  if (begin >= end) throw ParseError("empty packet", begin);
  if ((end - begin) % 4 != 0) throw ParseError("length not a multiple of 4", begin);

  std::size_t at = begin;
  if (b[begin] == '#') {
    const std::string_view tag = read_string(b, at, end);
    if (tag != kBundleTag) throw ParseError("unknown '#' packet", begin);
    if (depth >= kMaxBundleDepth) throw ParseError("bundle nesting too deep", begin);
    if (at + 8 > end) throw ParseError("truncated bundle timetag", at);
    at += 8;
    while (at < end) {
      if (at + 4 > end) throw ParseError("truncated bundle element size", at);
      const std::uint32_t size = get_u32(b, at);
      at += 4;
      if (size == 0 || size % 4 != 0 || size > end - at) throw ParseError("bad bundle element size", at - 4);
      parse_element(b, at, at + size, depth + 1, out, stamp_ms);
      at += size;
    }
    return;
  }

  if (b[begin] != '/') throw ParseError("address must start with '/'", begin);
  const std::string_view address = read_string(b, at, end);
  if (at >= end) throw ParseError("missing type-tag string", at);
  const std::size_t tag_at = at;
  if (b[at] != ',') throw ParseError("bad type-tag string", at);
  const std::string_view tags = read_string(b, at, end);

  if (address != kFrameAddress) {
    ++out.ignored;
    return;
  }
  if (tags.size() != 1 + kTaxels || tags.find_first_not_of('f', 1) != std::string_view::npos)
    throw ParseError("bad type-tag for frame message", tag_at);
  const std::size_t need = static_cast<std::size_t>(kTaxels) * 4;
  if (end - at < need) throw ParseError("truncated float arguments", at);
  if (end - at > need) throw ParseError("trailing bytes after arguments", at + need);

  Frame f;
  f.timestamp_ms = stamp_ms;
  for (int i = 0; i < kTaxels; ++i) {
    const std::uint32_t bits = get_u32(b, at + static_cast<std::size_t>(i) * 4);
    f.p[static_cast<std::size_t>(i)] = clamp_raw(std::bit_cast<float>(bits));
  }
  out.frames.push_back(f);
}

}  // namespace detail

/// Parses one UDP datagram. Bundles are unwrapped recursively; frames keep
/// their packet order and are stamped with `stamp_ms`.
inline ParseResult parse_packet(std::span<const std::uint8_t> bytes, std::int64_t stamp_ms = 0) {
  ParseResult out;
  detail::parse_element(bytes, 0, bytes.size(), 0, out, stamp_ms);
  return out;
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 84 + kTaxels * 4);
  detail::put_string(out, kFrameAddress);
  std::string tags(1 + kTaxels, 'f');
  tags[0] = ',';
  detail::put_string(out, tags);
  for (double v : f.p) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

// Wraps already-encoded packets in an immediate-timetag bundle.
inline std::vector<std::uint8_t> encode_bundle(std::span<const std::vector<std::uint8_t>> elements,
                                               std::uint64_t timetag = 1) {
  std::vector<std::uint8_t> out;
  detail::put_string(out, kBundleTag);
  detail::put_u32(out, static_cast<std::uint32_t>(timetag >> 32));
  detail::put_u32(out, static_cast<std::uint32_t>(timetag));
  for (const auto& e : elements) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.size()));
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

// A message with an arbitrary address and int32 arguments; used for
// exercising the skip path.
inline std::vector<std::uint8_t> encode_message(std::string_view address, std::span<const std::int32_t> args) {
  std::vector<std::uint8_t> out;
  detail::put_string(out, address);
  std::string tags(1 + args.size(), 'i');
  tags[0] = ',';
  detail::put_string(out, tags);
  for (std::int32_t v : args) detail::put_u32(out, static_cast<std::uint32_t>(v));
  return out;
}

}  // namespace texyz::osc
