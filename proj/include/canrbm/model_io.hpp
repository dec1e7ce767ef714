// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/hashing.hpp"
#include "canrbm/rbm.hpp"

namespace canrbm {

struct ModelMeta {
  AttackType attack_type = AttackType::Fuzzy;
  BitMode mode = BitMode::Full96;
  std::uint32_t scale_factor = 1'000'000;
};

namespace detail {

// Shortest decimal form that round-trips the exact double.
inline void append_double(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, res.ptr);
}

inline double read_double_token(std::string_view token, const char* what) {
  double x = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), x);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw IoError(std::string("model: bad value in ") + what + " block");
  }
  return x;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline void read_value_block(std::istream& in, const char* label, std::size_t rows,
                             std::size_t cols, std::vector<double>& out) {
  std::string line;
  if (!std::getline(in, line) || split_ws(line).size() != 1 || split_ws(line)[0] != label) {
    throw IoError(std::string("model: expected '") + label + "' block label");
  }
  out.clear();
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw IoError(std::string("model: truncated ") + label + " block");
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != cols) {
      throw DimensionError(std::string("model: ") + label + " row has " +
                           std::to_string(tokens.size()) + " values, expected " +
                           std::to_string(cols));
    }
    for (const auto& t : tokens) out.push_back(read_double_token(t, label));
  }
}

}  // namespace detail

/// Versioned text model file:
///
///   CANRBM v1
///   <attack_type> <mode> <kv> <kh> <scale_factor>
///   a
///   <kv values on one line>
///   b
///   <kh values on one line>
///   W
///   <kv lines of kh values, visible-major>
///
/// Values are printed with shortest round-trip precision, so
/// load(save(m)) == m bit-exactly.
inline void save_model(const RbmModel& m, const ModelMeta& meta, std::ostream& out) {
  validate(m);
  if (bit_length(meta.mode) != m.kv) {
    throw DimensionError("save_model: meta mode does not match model kv");
  }
  if (meta.scale_factor == 0) throw ValidationError("save_model: scale_factor must be positive");

  std::string text;
  text += "CANRBM v1\n";
  text += std::string(to_string(meta.attack_type)) + ' ' + std::string(to_string(meta.mode)) +
          ' ' + std::to_string(m.kv) + ' ' + std::to_string(m.kh) + ' ' +
          std::to_string(meta.scale_factor) + '\n';
  text += "a\n";
  for (std::size_t i = 0; i < m.kv; ++i) {
    if (i) text += ' ';
    detail::append_double(text, m.a[i]);
  }
  text += "\nb\n";
  for (std::size_t j = 0; j < m.kh; ++j) {
    if (j) text += ' ';
    detail::append_double(text, m.b[j]);
  }
  text += "\nW\n";
  for (std::size_t i = 0; i < m.kv; ++i) {
    for (std::size_t j = 0; j < m.kh; ++j) {
      if (j) text += ' ';
      detail::append_double(text, m.weight(i, j));
    }
    text += '\n';
  }
  out << text;
  if (!out) throw IoError("model write failed");
}

inline std::pair<RbmModel, ModelMeta> load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("model: empty stream");
  {
    const auto tokens = detail::split_ws(line);
    if (tokens.size() != 2 || tokens[0] != "CANRBM" || tokens[1] != "v1") {
      throw IoError("model: missing or unsupported version header");
    }
  }
  if (!std::getline(in, line)) throw IoError("model: truncated meta line");
  const auto meta_tokens = detail::split_ws(line);
  if (meta_tokens.size() != 5) throw IoError("model: malformed meta line");

  ModelMeta meta;
  meta.attack_type = parse_attack_type(meta_tokens[0]);
  meta.mode = parse_bit_mode(meta_tokens[1]);

  auto read_size = [](std::string_view t, const char* what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || v == 0) {
      throw IoError(std::string("model: bad ") + what + " field");
    }
    return v;
  };
  const std::size_t kv = read_size(meta_tokens[2], "kv");
  const std::size_t kh = read_size(meta_tokens[3], "kh");
  meta.scale_factor = static_cast<std::uint32_t>(read_size(meta_tokens[4], "scale_factor"));

  if (bit_length(meta.mode) != kv) {
    throw DimensionError("model: mode does not match declared kv");
  }

  RbmModel m;
  m.kv = kv;
  m.kh = kh;
  detail::read_value_block(in, "a", 1, kv, m.a);
  detail::read_value_block(in, "b", 1, kh, m.b);
  detail::read_value_block(in, "W", kv, kh, m.w);
  validate(m);
  return {std::move(m), meta};
}

/// Short content hash identifying a trained model, stable across runs.
inline std::string model_id(const RbmModel& m, const ModelMeta& meta) {
  std::ostringstream os;
  save_model(m, meta, os);
  Fnv1a64 h;
  h.update(os.str());
  return to_hex(h.value());
}

}  // namespace canrbm
