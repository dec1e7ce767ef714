// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canrbm/errors.hpp"

namespace canrbm {

constexpr std::uint16_t kMaxStandardId = 0x7FF;
constexpr std::size_t kPayloadBytes = 8;
constexpr std::size_t kDeltaBits = 16;
constexpr std::size_t kIdBits = 16;
constexpr std::size_t kFullFrameBits = 96;   // 16 delta + 16 id + 64 payload
constexpr std::size_t kDosFrameBits = 16;    // delta only
constexpr std::uint16_t kMaxDeltaTicks = 0xFFFF;

enum class FrameLabel : std::uint8_t { Regular, Injected };

enum class AttackType : std::uint8_t { Dos, Fuzzy, Gear, Rpm };

enum class BitMode : std::uint8_t { Full96, Dos16 };

constexpr std::size_t bit_length(BitMode m) {
  return m == BitMode::Full96 ? kFullFrameBits : kDosFrameBits;
}

/// Dos trains on the timestamp field alone; every other attack type uses the
/// full frame encoding.
constexpr BitMode mode_for(AttackType t) {
  return t == AttackType::Dos ? BitMode::Dos16 : BitMode::Full96;
}

inline std::string_view to_string(AttackType t) {
  switch (t) {
    case AttackType::Dos: return "dos";
    case AttackType::Fuzzy: return "fuzzy";
    case AttackType::Gear: return "gear";
    case AttackType::Rpm: return "rpm";
  }
  return "?";
}

inline std::string_view to_string(BitMode m) {
  return m == BitMode::Full96 ? "full96" : "dos16";
}

inline AttackType parse_attack_type(std::string_view s) {
  if (s == "dos") return AttackType::Dos;
  if (s == "fuzzy") return AttackType::Fuzzy;
  if (s == "gear") return AttackType::Gear;
  if (s == "rpm") return AttackType::Rpm;
  throw ValidationError("unknown attack type: " + std::string(s));
}

inline BitMode parse_bit_mode(std::string_view s) {
  if (s == "full96") return BitMode::Full96;
  if (s == "dos16") return BitMode::Dos16;
  throw ValidationError("unknown bit mode: " + std::string(s));
}

/// One decoded bus message. `data` holds `dlc` meaningful bytes; the rest are
/// zero.
struct CanFrame {
  double timestamp = 0.0;  // absolute seconds from the log
  std::uint16_t can_id = 0;
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, kPayloadBytes> data{};
  FrameLabel label = FrameLabel::Regular;

  std::span<const std::uint8_t> payload() const { return {data.data(), dlc}; }

  bool operator==(const CanFrame&) const = default;
};

/// Fixed-length {0,1} vector, the RBM visible-layer representation of one
/// frame (Full96) or one timestamp delta (Dos16).
class BitVector {
 public:
  explicit BitVector(BitMode mode) : mode_(mode), bits_(bit_length(mode), 0) {}

  BitVector(BitMode mode, std::vector<std::uint8_t> bits)
      : mode_(mode), bits_(std::move(bits)) {
    if (bits_.size() != bit_length(mode_)) {
      throw DimensionError("BitVector: expected " +
                           std::to_string(bit_length(mode_)) + " bits, got " +
                           std::to_string(bits_.size()));
    }
    for (const auto b : bits_) {
      if (b > 1) throw ValidationError("BitVector: element not in {0,1}");
    }
  }

  BitMode mode() const { return mode_; }
  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const BitVector&) const = default;

 private:
  BitMode mode_;
  std::vector<std::uint8_t> bits_;
};

/// A batch of encoded frames sharing one mode, ready for RBM training.
struct EncodedDataset {
  AttackType attack_type = AttackType::Fuzzy;
  std::uint32_t scale_factor = 1'000'000;
  std::vector<BitVector> vectors;

  BitMode mode() const { return mode_for(attack_type); }
};

inline void validate(const EncodedDataset& ds) {
  if (ds.scale_factor == 0) throw ValidationError("dataset: scale_factor must be positive");
  const BitMode m = ds.mode();
  for (const auto& v : ds.vectors) {
    if (v.mode() != m) {
      throw ValidationError("dataset: vector mode does not match attack type");
    }
  }
}

}  // namespace canrbm
