// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"

namespace canrbm {

struct ParseOptions {
  bool strict = false;  // abort on the first malformed record
  // Bus logs hold 11-bit standard ids; generated CSVs store the full 16-bit
  // encoded id field, so their reader widens this bound.
  std::uint32_t max_id = kMaxStandardId;
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based line number in the input
  std::string reason;
};

struct ParseResult {
  std::vector<CanFrame> frames;
  std::vector<ParseIssue> issues;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline void split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

inline bool parse_hex(std::string_view s, std::size_t max_digits, std::uint32_t& out) {
  if (s.empty() || s.size() > max_digits) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out, 16);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_uint(std::string_view s, std::uint32_t& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out, 10);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses an HCRL-style log: UTF-8 lines of
/// `timestamp,can_id_hex,dlc,d0,...,d{dlc-1},flag` with flag R (regular) or
/// T (injected). An optional single header line is detected and skipped.
/// Malformed records are skipped and reported (lenient, the default) or raise
/// ParseError (strict).
inline ParseResult parse_hcrl_csv(std::istream& in, const ParseOptions& opts = {}) {
  ParseResult result;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  bool saw_record_or_header = false;

  auto fail = [&](const std::string& reason) {
    if (opts.strict) throw ParseError(reason, line_no);
    result.issues.push_back({line_no, reason});
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = detail::trim(line);
    if (trimmed.empty()) continue;

    detail::split_csv(trimmed, fields);

    double ts = 0.0;
    if (!detail::parse_double(fields[0], ts)) {
      // A non-numeric first field on the first contentful line is a header.
      if (!saw_record_or_header) {
        saw_record_or_header = true;
        continue;
      }
      fail("timestamp is not a decimal number");
      continue;
    }
    saw_record_or_header = true;

    if (ts < 0.0) {
      fail("negative timestamp");
      continue;
    }
    if (fields.size() < 4) {
      fail("too few fields");
      continue;
    }

    std::uint32_t id = 0;
    if (!detail::parse_hex(fields[1], 4, id)) {
      fail("bad can_id field");
      continue;
    }
    if (id > opts.max_id) {
      fail("can_id exceeds 11-bit standard range");
      continue;
    }

    std::uint32_t dlc = 0;
    if (!detail::parse_uint(fields[2], dlc) || dlc > kPayloadBytes) {
      fail("bad dlc field");
      continue;
    }
    if (fields.size() != 3 + dlc + 1) {
      fail("field count does not match dlc");
      continue;
    }

    CanFrame frame;
    frame.timestamp = ts;
    frame.can_id = static_cast<std::uint16_t>(id);
    frame.dlc = static_cast<std::uint8_t>(dlc);
    bool bytes_ok = true;
    for (std::size_t i = 0; i < dlc; ++i) {
      std::uint32_t byte = 0;
      if (!detail::parse_hex(fields[3 + i], 2, byte)) {
        bytes_ok = false;
        break;
      }
      frame.data[i] = static_cast<std::uint8_t>(byte);
    }
    if (!bytes_ok) {
      fail("bad data byte field");
      continue;
    }

    const std::string_view flag = fields.back();
    if (flag == "R") {
      frame.label = FrameLabel::Regular;
    } else if (flag == "T") {
      frame.label = FrameLabel::Injected;
    } else {
      fail("flag must be R or T");
      continue;
    }

    result.frames.push_back(frame);
  }
  return result;
}

/// Writes frames in the same format parse_hcrl_csv reads, so
/// parse(write(frames)) == frames.
inline void write_hcrl_csv(std::span<const CanFrame> frames, std::ostream& out) {
  char buf[64];
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof(buf), "%.6f,%04x,%u", f.timestamp, f.can_id,
                  static_cast<unsigned>(f.dlc));
    out << buf;
    for (std::size_t i = 0; i < f.dlc; ++i) {
      std::snprintf(buf, sizeof(buf), ",%02x", f.data[i]);
      out << buf;
    }
    out << ',' << (f.label == FrameLabel::Injected ? 'T' : 'R') << '\n';
  }
}

/// Keeps exactly the frames with the standard payload length of 8 bytes,
/// preserving order.
inline std::vector<CanFrame> filter_standard_frames(std::span<const CanFrame> frames) {
  std::vector<CanFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.dlc == kPayloadBytes) out.push_back(f);
  }
  return out;
}

/// Per-frame timestamp differencing: out[i] = round((ts[i] - ts[i-1]) * scale),
/// half-up, clamped to [0, 65535]. The first frame has no predecessor and maps
/// to 0. Frames must be in nondecreasing timestamp order.
inline std::vector<std::uint16_t> normalize_timestamps(std::span<const CanFrame> frames,
                                                       std::uint32_t scale_factor) {
  if (scale_factor == 0) throw ValidationError("scale_factor must be positive");
  std::vector<std::uint16_t> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i == 0) {
      out.push_back(0);
      continue;
    }
    const double dt = frames[i].timestamp - frames[i - 1].timestamp;
    if (dt < 0.0) {
      throw ValidationError("decreasing timestamp at index " + std::to_string(i));
    }
    const double ticks = std::floor(dt * static_cast<double>(scale_factor) + 0.5);
    out.push_back(ticks > static_cast<double>(kMaxDeltaTicks)
                      ? kMaxDeltaTicks
                      : static_cast<std::uint16_t>(ticks));
  }
  return out;
}

namespace detail {

inline void put_bits_be(BitVector& v, std::size_t offset, std::uint32_t value,
                        std::size_t nbits) {
  for (std::size_t i = 0; i < nbits; ++i) {
    v.set(offset + i, (value >> (nbits - 1 - i)) & 1U);
  }
}

inline std::uint32_t get_bits_be(const BitVector& v, std::size_t offset,
                                 std::size_t nbits) {
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < nbits; ++i) {
    value = (value << 1) | v[offset + i];
  }
  return value;
}

}  // namespace detail

/// Binary frame layout, all fields big-endian:
///   Full96: [delta:16][can_id:16][data0:8]...[data7:8]
///   Dos16:  [delta:16]
inline BitVector encode_frame(const CanFrame& frame, std::uint16_t delta, BitMode mode) {
  BitVector v(mode);
  detail::put_bits_be(v, 0, delta, kDeltaBits);
  if (mode == BitMode::Dos16) return v;
  if (frame.dlc != kPayloadBytes) {
    throw ValidationError("encode_frame: Full96 requires dlc = 8, got " +
                          std::to_string(frame.dlc));
  }
  detail::put_bits_be(v, kDeltaBits, frame.can_id, kIdBits);
  for (std::size_t i = 0; i < kPayloadBytes; ++i) {
    detail::put_bits_be(v, kDeltaBits + kIdBits + 8 * i, frame.data[i], 8);
  }
  return v;
}

/// Inverse of encode_frame. Decoded IDs above 0x7FF are reported as-is
/// (generated vectors may use the full 16-bit field); standard_id() flags them.
struct DecodedFrame {
  BitMode mode = BitMode::Full96;
  std::uint16_t delta_ticks = 0;
  double delta_seconds = 0.0;
  std::uint32_t can_id = 0;
  std::array<std::uint8_t, kPayloadBytes> data{};

  bool standard_id() const { return can_id <= kMaxStandardId; }
};

inline DecodedFrame decode_frame(const BitVector& vec, std::uint32_t scale_factor) {
  if (scale_factor == 0) throw ValidationError("scale_factor must be positive");
  DecodedFrame out;
  out.mode = vec.mode();
  out.delta_ticks = static_cast<std::uint16_t>(detail::get_bits_be(vec, 0, kDeltaBits));
  out.delta_seconds = static_cast<double>(out.delta_ticks) / static_cast<double>(scale_factor);
  if (vec.mode() == BitMode::Dos16) return out;
  out.can_id = detail::get_bits_be(vec, kDeltaBits, kIdBits);
  for (std::size_t i = 0; i < kPayloadBytes; ++i) {
    out.data[i] =
        static_cast<std::uint8_t>(detail::get_bits_be(vec, kDeltaBits + kIdBits + 8 * i, 8));
  }
  return out;
}

enum class LabelFilter : std::uint8_t { InjectedOnly, RegularOnly, All };

inline std::string_view to_string(LabelFilter f) {
  switch (f) {
    case LabelFilter::InjectedOnly: return "injected";
    case LabelFilter::RegularOnly: return "regular";
    case LabelFilter::All: return "all";
  }
  return "?";
}

inline LabelFilter parse_label_filter(std::string_view s) {
  if (s == "injected") return LabelFilter::InjectedOnly;
  if (s == "regular") return LabelFilter::RegularOnly;
  if (s == "all") return LabelFilter::All;
  throw ValidationError("unknown label filter: " + std::string(s));
}

/// Full processing chain for one attack class: keep dlc-8 frames, select by
/// label, difference timestamps over the selected subsequence, encode.
inline EncodedDataset encode_dataset(std::span<const CanFrame> frames, AttackType type,
                                     std::uint32_t scale_factor,
                                     LabelFilter filter = LabelFilter::InjectedOnly) {
  std::vector<CanFrame> kept = filter_standard_frames(frames);
  if (filter != LabelFilter::All) {
    const FrameLabel want =
        filter == LabelFilter::InjectedOnly ? FrameLabel::Injected : FrameLabel::Regular;
    std::erase_if(kept, [&](const CanFrame& f) { return f.label != want; });
  }
  const std::vector<std::uint16_t> deltas = normalize_timestamps(kept, scale_factor);

  EncodedDataset ds;
  ds.attack_type = type;
  ds.scale_factor = scale_factor;
  ds.vectors.reserve(kept.size());
  const BitMode mode = mode_for(type);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    ds.vectors.push_back(encode_frame(kept[i], deltas[i], mode));
  }
  return ds;
}

// --- dataset file format -----------------------------------------------------
//
//   CANRBM-DATASET v1
//   <attack_type> <mode> <scale_factor> <count>
//   <count lines of '0'/'1' characters, one vector per line>

inline void write_dataset(const EncodedDataset& ds, std::ostream& out) {
  validate(ds);
  out << "CANRBM-DATASET v1\n";
  out << to_string(ds.attack_type) << ' ' << to_string(ds.mode()) << ' '
      << ds.scale_factor << ' ' << ds.vectors.size() << '\n';
  std::string row;
  for (const auto& v : ds.vectors) {
    row.clear();
    for (std::size_t i = 0; i < v.size(); ++i) row.push_back(v[i] ? '1' : '0');
    out << row << '\n';
  }
  if (!out) throw IoError("dataset write failed");
}

inline EncodedDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "CANRBM-DATASET v1") {
    throw IoError("dataset: missing or unsupported version header");
  }
  if (!std::getline(in, line)) throw IoError("dataset: truncated header");

  std::vector<std::string_view> fields;
  std::string_view meta = detail::trim(line);
  fields.clear();
  std::size_t pos = 0;
  while (pos < meta.size()) {
    std::size_t space = meta.find(' ', pos);
    if (space == std::string_view::npos) space = meta.size();
    fields.push_back(meta.substr(pos, space - pos));
    pos = space + 1;
  }
  if (fields.size() != 4) throw IoError("dataset: malformed header line");

  EncodedDataset ds;
  ds.attack_type = parse_attack_type(fields[0]);
  const BitMode mode = parse_bit_mode(fields[1]);
  if (mode != ds.mode()) throw ValidationError("dataset: mode does not match attack type");
  std::uint32_t scale = 0, count = 0;
  if (!detail::parse_uint(fields[2], scale) || scale == 0 ||
      !detail::parse_uint(fields[3], count)) {
    throw IoError("dataset: malformed header line");
  }
  ds.scale_factor = scale;

  ds.vectors.reserve(count);
  const std::size_t nbits = bit_length(mode);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("dataset: truncated vector block");
    const std::string_view row = detail::trim(line);
    if (row.size() != nbits) {
      throw DimensionError("dataset: vector " + std::to_string(i) + " has " +
                           std::to_string(row.size()) + " bits, expected " +
                           std::to_string(nbits));
    }
    std::vector<std::uint8_t> bits(nbits);
    for (std::size_t j = 0; j < nbits; ++j) {
      if (row[j] != '0' && row[j] != '1') throw IoError("dataset: invalid bit character");
      bits[j] = row[j] == '1' ? 1 : 0;
    }
    ds.vectors.emplace_back(mode, std::move(bits));
  }
  return ds;
}

}  // namespace canrbm
