// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/rng.hpp"

namespace canrbm {

/// One periodic background ECU. Payload evolution is deterministic: an
/// optional free-running counter byte plus low-bit noise on masked bytes.
struct EcuSpec {
  std::uint16_t id = 0;
  double period = 0.01;  // seconds between frames
  std::array<std::uint8_t, kPayloadBytes> payload{};
  std::uint8_t counter_byte = 0xFF;  // 0xFF = no counter byte
  std::uint8_t noise_mask = 0;       // bit i set -> payload byte i takes 2-bit noise
};

enum class FixtureAttackKind : std::uint8_t { Dos, Fuzzy, Spoofing };

inline std::string_view to_string(FixtureAttackKind k) {
  switch (k) {
    case FixtureAttackKind::Dos: return "dos";
    case FixtureAttackKind::Fuzzy: return "fuzzy";
    case FixtureAttackKind::Spoofing: return "spoofing";
  }
  return "?";
}

struct AttackSpec {
  FixtureAttackKind kind = FixtureAttackKind::Dos;
  double rate = 0.3;              // injected fraction of all frames, in (0,1)
  std::uint16_t target_id = 0;    // Spoofing only
  std::array<std::uint8_t, kPayloadBytes> payload_template{};  // Spoofing only
  std::array<std::uint8_t, kPayloadBytes> payload_jitter{};    // per-byte +- range
  std::uint64_t seed = 0;         // extra entropy for the injection stream
};

inline void validate(const AttackSpec& spec) {
  if (!(spec.rate > 0.0 && spec.rate < 1.0)) {
    throw ValidationError("attack spec: rate must lie in (0,1)");
  }
  if (spec.kind == FixtureAttackKind::Spoofing && spec.target_id > kMaxStandardId) {
    throw ValidationError("attack spec: spoofing target above 0x7ff");
  }
}

/// Eight ECUs with periods between 1 and 20 ms. The pool includes the gear
/// (0x43f) and rpm (0x316) broadcasters so spoofed ids also occur legitimately.
inline std::vector<EcuSpec> default_id_pool() {
  return {
      {0x080, 0.001, {0x00, 0x17, 0xEA, 0x0A, 0x20, 0x1A, 0x20, 0x43}, 7, 0b00010000},
      {0x153, 0.002, {0xD0, 0x89, 0x10, 0xFF, 0x00, 0xFF, 0x00, 0x00}, 0xFF, 0b00000100},
      {0x220, 0.005, {0x17, 0x28, 0x23, 0x7D, 0x00, 0x00, 0x00, 0x00}, 7, 0},
      {0x2A0, 0.005, {0x64, 0x00, 0x9A, 0x1D, 0x97, 0x02, 0xBD, 0x00}, 0xFF, 0b01000000},
      {0x316, 0.010, {0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6F}, 0xFF, 0b00001100},
      {0x329, 0.010, {0x40, 0xBB, 0x7F, 0x14, 0x11, 0x20, 0x00, 0x14}, 7, 0},
      {0x43F, 0.020, {0x00, 0x40, 0x60, 0xFF, 0x5A, 0x6C, 0x08, 0x00}, 0xFF, 0b00010000},
      {0x545, 0.020, {0xD8, 0x00, 0x00, 0x8B, 0x00, 0x00, 0x00, 0x00}, 7, 0},
  };
}

/// Canonical attack parameterization per attack class: DoS floods, Fuzzy
/// randomizes, Gear/Rpm spoof their ECU's id with a crafted payload whose
/// varying bytes get bounded jitter.
inline AttackSpec make_attack_spec(AttackType type, double rate = 0.3) {
  AttackSpec spec;
  spec.rate = rate;
  switch (type) {
    case AttackType::Dos:
      spec.kind = FixtureAttackKind::Dos;
      break;
    case AttackType::Fuzzy:
      spec.kind = FixtureAttackKind::Fuzzy;
      break;
    case AttackType::Gear:
      spec.kind = FixtureAttackKind::Spoofing;
      spec.target_id = 0x43F;  // 1087
      spec.payload_template = {1, 69, 96, 255, 107, 0, 0, 16};
      spec.payload_jitter = {0, 0, 0, 0, 8, 0, 0, 0};
      break;
    case AttackType::Rpm:
      spec.kind = FixtureAttackKind::Spoofing;
      spec.target_id = 0x316;  // 790
      spec.payload_template = {0x05, 0x20, 0xEA, 0x0C, 0x00, 0x45, 0x00, 0x00};
      spec.payload_jitter = {0, 0, 6, 6, 0, 0, 0, 0};
      break;
  }
  return spec;
}

namespace detail {

// Fixture time base, microsecond grid. Doubles represent both the microsecond
// count and the resulting seconds exactly enough for %.6f round trips.
inline constexpr std::uint64_t kEpochUs = 1'478'198'400'000'000ULL;
inline constexpr std::uint64_t kDosGapUs = 100;      // flood inter-frame delta
inline constexpr std::uint64_t kInjectMinGapUs = 200;   // other attacks
inline constexpr std::uint64_t kInjectMaxGapUs = 2000;

inline double us_to_seconds(std::uint64_t us) {
  // Dividing by the exactly representable 1e6 gives the correctly rounded
  // value, which is what keeps %.6f emit/parse round trips bit-exact.
  return static_cast<double>(us) / 1e6;
}

}  // namespace detail

/// Deterministic labeled CAN traffic: periodic background frames from the id
/// pool (with +-5% timestamp jitter), optionally interleaved with injected
/// attack frames at the requested rate. Timestamps are strictly increasing on
/// a microsecond grid, so emitted logs reparse exactly.
inline std::vector<CanFrame> simulate_traffic(std::size_t n_frames,
                                              std::span<const EcuSpec> id_pool,
                                              const std::optional<AttackSpec>& attack,
                                              std::uint64_t seed) {
  if (n_frames < 1) throw ValidationError("simulate_traffic: n_frames must be >= 1");
  if (id_pool.empty()) throw ValidationError("simulate_traffic: empty id pool");
  for (const auto& ecu : id_pool) {
    if (ecu.id > kMaxStandardId) throw ValidationError("simulate_traffic: id above 0x7ff");
    if (!(ecu.period > 0.0)) throw ValidationError("simulate_traffic: period must be positive");
  }
  if (attack) validate(*attack);

  SeededRng bg_rng(derive_seed(seed, 0));
  SeededRng slot_rng(derive_seed(seed, 1));
  SeededRng inj_rng(derive_seed(derive_seed(seed, 2), attack ? attack->seed : 0));

  const std::size_t n_ecus = id_pool.size();
  std::vector<std::uint64_t> period_us(n_ecus), next_us(n_ecus);
  std::vector<std::uint8_t> counters(n_ecus, 0);
  for (std::size_t i = 0; i < n_ecus; ++i) {
    period_us[i] = static_cast<std::uint64_t>(id_pool[i].period * 1e6 + 0.5);
    if (period_us[i] == 0) period_us[i] = 1;
    next_us[i] = detail::kEpochUs + bg_rng.uniform_index(period_us[i]);
  }

  std::vector<CanFrame> frames;
  frames.reserve(n_frames);
  std::uint64_t last_us = detail::kEpochUs;
  while (frames.size() < n_frames) {
    CanFrame frame;
    frame.dlc = kPayloadBytes;
    if (attack && slot_rng.bernoulli(attack->rate)) {
      frame.label = FrameLabel::Injected;
      std::uint64_t gap = 0;
      switch (attack->kind) {
        case FixtureAttackKind::Dos:
          frame.can_id = 0;
          gap = detail::kDosGapUs;
          break;
        case FixtureAttackKind::Fuzzy:
          frame.can_id = static_cast<std::uint16_t>(inj_rng.uniform_index(kMaxStandardId + 1));
          for (auto& byte : frame.data) {
            byte = static_cast<std::uint8_t>(inj_rng.uniform_index(256));
          }
          gap = detail::kInjectMinGapUs +
                inj_rng.uniform_index(detail::kInjectMaxGapUs - detail::kInjectMinGapUs + 1);
          break;
        case FixtureAttackKind::Spoofing:
          frame.can_id = attack->target_id;
          for (std::size_t b = 0; b < kPayloadBytes; ++b) {
            const int jitter = attack->payload_jitter[b]
                                   ? inj_rng.uniform_int(-attack->payload_jitter[b],
                                                         attack->payload_jitter[b])
                                   : 0;
            frame.data[b] = static_cast<std::uint8_t>(
                std::clamp(static_cast<int>(attack->payload_template[b]) + jitter, 0, 255));
          }
          gap = detail::kInjectMinGapUs +
                inj_rng.uniform_index(detail::kInjectMaxGapUs - detail::kInjectMinGapUs + 1);
          break;
      }
      last_us += std::max<std::uint64_t>(gap, 1);
    } else {
      frame.label = FrameLabel::Regular;
      std::size_t ecu = 0;
      for (std::size_t i = 1; i < n_ecus; ++i) {
        if (next_us[i] < next_us[ecu]) ecu = i;
      }
      const auto& spec = id_pool[ecu];
      const auto p5 = static_cast<int>(period_us[ecu] / 20);  // +-5% jitter
      const int jitter = p5 > 0 ? bg_rng.uniform_int(-p5, p5) : 0;
      const auto scheduled =
          static_cast<std::uint64_t>(static_cast<std::int64_t>(next_us[ecu]) + jitter);
      last_us = std::max(scheduled, last_us + 1);
      next_us[ecu] += period_us[ecu];

      frame.can_id = spec.id;
      frame.data = spec.payload;
      if (spec.counter_byte < kPayloadBytes) {
        frame.data[spec.counter_byte] = counters[ecu]++;
      }
      for (std::size_t b = 0; b < kPayloadBytes; ++b) {
        if (spec.noise_mask & (1U << b)) {
          frame.data[b] ^= static_cast<std::uint8_t>(bg_rng.uniform_index(4));
        }
      }
    }
    frame.timestamp = detail::us_to_seconds(last_us);
    frames.push_back(frame);
  }
  return frames;
}

/// Documents the fixture's engineering parameters (periods, jitter, rates) so
/// runs are interpretable and comparable.
inline void write_fixture_manifest(std::span<const EcuSpec> id_pool,
                                   const std::optional<AttackSpec>& attack,
                                   std::size_t n_frames, std::uint64_t seed,
                                   std::ostream& out) {
  out << "n_frames\t" << n_frames << '\n';
  out << "seed\t" << seed << '\n';
  out << "timestamp_jitter\t0.05\n";
  for (const auto& ecu : id_pool) {
    out << "ecu\t" << ecu.id << "\tperiod_s\t" << ecu.period << '\n';
  }
  if (attack) {
    out << "attack_kind\t" << to_string(attack->kind) << '\n';
    out << "attack_rate\t" << attack->rate << '\n';
    if (attack->kind == FixtureAttackKind::Spoofing) {
      out << "attack_target_id\t" << attack->target_id << '\n';
    }
  } else {
    out << "attack_kind\tnone\n";
  }
}

}  // namespace canrbm
