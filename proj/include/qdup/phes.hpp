#pragma once

// PHES binary event files.
//
// Layout, little-endian, no padding:
//   0   char[4]  "PHES"
//   4   u8       version (1)
//   5   u8       channel count (1 + highest channel id; 0 for no events)
//   6   u64      duration_ps
//   14  u64      event count
//   22  u64      seed
//   30  records: u8 channel, u8 origin, u64 time_ps (10 bytes each)

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qdup/core.hpp"

namespace qdup {

inline constexpr std::array<char, 4> kPhesMagic{'P', 'H', 'E', 'S'};
inline constexpr std::uint8_t kPhesVersion = 1;
inline constexpr std::size_t kPhesHeaderSize = 30;
inline constexpr std::size_t kPhesRecordSize = 10;

struct EventFileHeader {
  std::uint8_t version = kPhesVersion;
  std::uint8_t channel_count = 0;
  std::uint64_t duration_ps = 0;
  std::uint64_t event_count = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const EventFileHeader&, const EventFileHeader&) = default;
};

struct EventFile {
  EventFileHeader header;
  EventStream stream;
};

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_events(const EventStream& stream, std::uint64_t seed) {
  if (!stream.is_valid()) throw PreconditionError("event stream is unsorted or has times outside [0, duration]");
  std::uint8_t max_channel = 0;
  for (const auto& e : stream.events) {
    if (e.channel == std::numeric_limits<std::uint8_t>::max()) throw PreconditionError("channel 255 is reserved");
    max_channel = std::max(max_channel, e.channel);
  }
  std::vector<std::uint8_t> out;
  out.reserve(kPhesHeaderSize + kPhesRecordSize * stream.size());
  out.insert(out.end(), kPhesMagic.begin(), kPhesMagic.end());
  out.push_back(kPhesVersion);
  out.push_back(stream.events.empty() ? 0 : static_cast<std::uint8_t>(max_channel + 1));
  detail::put_u64(out, static_cast<std::uint64_t>(stream.duration));
  detail::put_u64(out, stream.size());
  detail::put_u64(out, seed);
  for (const auto& e : stream.events) {
    out.push_back(e.channel);
    out.push_back(static_cast<std::uint8_t>(e.origin));
    detail::put_u64(out, static_cast<std::uint64_t>(e.time));
  }
  return out;
}

// Parses and validates a PHES image. Every failure is a ParseError carrying
// the byte offset of the offending field.
inline EventFile decode_events(std::span<const std::uint8_t> in) {
  auto need = [&](std::size_t at, std::size_t n, const char* what) {
    if (in.size() < at + n) {
      throw ParseError(at, std::string("truncated ") + what + ": needs " + std::to_string(n) + " bytes, " +
                               std::to_string(in.size() - std::min(in.size(), at)) + " available");
    }
  };
  need(0, 4, "magic");
  if (std::memcmp(in.data(), kPhesMagic.data(), 4) != 0) throw ParseError(0, "bad magic, expected \"PHES\"");
  need(4, 1, "version");
  if (in[4] != kPhesVersion) throw ParseError(4, "unsupported version " + std::to_string(in[4]));
  need(5, 1, "channel count");
  need(6, 8, "duration");
  need(14, 8, "event count");
  need(22, 8, "seed");

  EventFile f;
  f.header.version = in[4];
  f.header.channel_count = in[5];
  f.header.duration_ps = detail::get_u64(in, 6);
  f.header.event_count = detail::get_u64(in, 14);
  f.header.seed = detail::get_u64(in, 22);
  constexpr auto kMaxTime = static_cast<std::uint64_t>(std::numeric_limits<TimePs>::max());
  if (f.header.duration_ps > kMaxTime) throw ParseError(6, "duration exceeds the signed 64-bit range");

  const std::size_t body = in.size() - kPhesHeaderSize;
  const std::uint64_t complete = body / kPhesRecordSize;
  if (f.header.event_count > complete) {
    const std::size_t at = kPhesHeaderSize + static_cast<std::size_t>(complete) * kPhesRecordSize;
    throw ParseError(at, "truncated record " + std::to_string(complete) + " of " +
                             std::to_string(f.header.event_count) + ": needs " + std::to_string(kPhesRecordSize) +
                             " bytes, " + std::to_string(in.size() - at) + " available");
  }
  const std::size_t end = kPhesHeaderSize + static_cast<std::size_t>(f.header.event_count) * kPhesRecordSize;
  if (in.size() != end) throw ParseError(end, "trailing bytes after the last record");

  f.stream.duration = static_cast<TimePs>(f.header.duration_ps);
  f.stream.events.reserve(static_cast<std::size_t>(f.header.event_count));
  TimePs prev = 0;
  for (std::size_t at = kPhesHeaderSize; at < end; at += kPhesRecordSize) {
    const std::uint8_t ch = in[at];
    const std::uint8_t origin = in[at + 1];
    const std::uint64_t t = detail::get_u64(in, at + 2);
    if (ch >= f.header.channel_count) {
      throw ParseError(at, "channel " + std::to_string(ch) + " not below channel count " +
                               std::to_string(f.header.channel_count));
    }
    if (origin >= kOriginCount) throw ParseError(at + 1, "unknown origin " + std::to_string(origin));
    if (t > f.header.duration_ps) throw ParseError(at + 2, "time " + std::to_string(t) + " ps beyond duration");
    const auto time = static_cast<TimePs>(t);
    if (time < prev) throw ParseError(at + 2, "time decreases");
    prev = time;
    f.stream.events.push_back({time, ch, static_cast<Origin>(origin)});
  }
  return f;
}

inline void write_events(const std::filesystem::path& path, const EventStream& stream, std::uint64_t seed) {
  const auto bytes = encode_events(stream, seed);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

inline EventFile read_events(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_events(bytes);
}

}  // namespace qdup
