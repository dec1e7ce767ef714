// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "canrbm/can_codec.hpp"
#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/model_io.hpp"
#include "canrbm/rbm.hpp"
#include "canrbm/rng.hpp"
#include "canrbm/windows.hpp"

namespace canrbm {

enum class OutputMode : std::uint8_t {
  Stochastic,     // Bernoulli sample of the final visible probabilities
  Deterministic,  // threshold the final visible probabilities at 0.5
};

inline std::string_view to_string(OutputMode m) {
  return m == OutputMode::Stochastic ? "stochastic" : "deterministic";
}

inline OutputMode parse_output_mode(std::string_view text) {
  if (text == "stochastic") return OutputMode::Stochastic;
  if (text == "deterministic") return OutputMode::Deterministic;
  throw ValidationError("unknown output mode: " + std::string(text));
}

struct GenerationConfig {
  std::size_t count = 1;
  std::size_t gibbs_iters = 50;
  std::uint64_t seed = 0;
  OutputMode output_mode = OutputMode::Stochastic;
};

inline void validate(const GenerationConfig& c) {
  if (c.count < 1) throw ValidationError("generation config: count must be >= 1");
  if (c.gibbs_iters < 1) throw ValidationError("generation config: gibbs_iters must be >= 1");
}

/// Sample synthetic visible vectors: seed the hidden layer with uniform
/// Bernoulli(0.5) bits, alternate visible/hidden sampling gibbs_iters times,
/// and emit the visible layer. Each sample runs its own chain with a seed
/// derived from (config.seed, sample index), so samples are independent and
/// the list is reproducible (and shardable) regardless of count.
inline std::vector<BitVector> generate_bitvectors(const RbmModel& model,
                                                  const GenerationConfig& config) {
  validate(model);
  validate(config);
  const BitMode mode = model.kv == kDosFrameBits ? BitMode::Dos16 : BitMode::Full96;
  if (bit_length(mode) != model.kv) {
    throw DimensionError("generate: model kv matches no encoding mode");
  }

  std::vector<BitVector> out;
  out.reserve(config.count);
  std::vector<std::uint8_t> h(model.kh), v(model.kv);
  std::vector<double> pv;
  for (std::size_t s = 0; s < config.count; ++s) {
    SeededRng rng(derive_seed(config.seed, s));
    for (auto& bit : h) bit = rng.bernoulli(0.5) ? 1 : 0;
    for (std::size_t t = 0; t < config.gibbs_iters; ++t) {
      pv = visible_probs(model, h);
      v = sample_bits(pv, rng);
      h = sample_bits(hidden_probs(model, v), rng);
    }
    if (config.output_mode == OutputMode::Deterministic) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = pv[i] >= 0.5 ? 1 : 0;
    }
    out.emplace_back(mode, v);
  }
  return out;
}

/// A decoded synthetic sample plus the provenance needed to regenerate it.
/// Dos16 samples model only the timestamp delta; can_id and data then hold the
/// canonical flood-frame shape (id 0, zero payload).
struct GeneratedFrame {
  BitMode mode = BitMode::Full96;
  std::uint16_t delta_ticks = 0;
  double delta_seconds = 0.0;
  std::uint16_t can_id = 0;
  std::array<std::uint8_t, kPayloadBytes> data{};
  std::string model_id;  // empty when read back from a CSV
  std::uint64_t seed = 0;
  std::size_t sample_index = 0;
};

inline std::vector<GeneratedFrame> generate_frames(const RbmModel& model, const ModelMeta& meta,
                                                   const GenerationConfig& config) {
  if (bit_length(meta.mode) != model.kv) {
    throw DimensionError("generate: meta mode disagrees with model kv");
  }
  const auto vectors = generate_bitvectors(model, config);
  const std::string id = model_id(model, meta);

  std::vector<GeneratedFrame> frames;
  frames.reserve(vectors.size());
  for (std::size_t s = 0; s < vectors.size(); ++s) {
    const DecodedFrame d = decode_frame(vectors[s], meta.scale_factor);
    GeneratedFrame g;
    g.mode = d.mode;
    g.delta_ticks = d.delta_ticks;
    g.delta_seconds = d.delta_seconds;
    g.can_id = static_cast<std::uint16_t>(d.can_id);
    g.data = d.data;
    g.model_id = id;
    g.seed = config.seed;
    g.sample_index = s;
    frames.push_back(std::move(g));
  }
  return frames;
}

/// Re-encode a generated frame in its own mode, inverse of the decode inside
/// generate_frames.
inline BitVector generated_bitvector(const GeneratedFrame& g) {
  BitVector vec(g.mode);
  detail::put_bits_be(vec, 0, g.delta_ticks, kDeltaBits);
  if (g.mode == BitMode::Full96) {
    detail::put_bits_be(vec, kDeltaBits, g.can_id, kIdBits);
    for (std::size_t byte = 0; byte < kPayloadBytes; ++byte) {
      detail::put_bits_be(vec, kDeltaBits + kIdBits + byte * 8, g.data[byte], 8);
    }
  }
  return vec;
}

/// Re-encode a generated frame as a Full96 vector. Dos16 samples expand to
/// the canonical flood frame: their delta bits plus id 0 and zero payload.
inline BitVector full96_bitvector(const GeneratedFrame& g) {
  if (g.mode == BitMode::Full96) return generated_bitvector(g);
  BitVector vec(BitMode::Full96);
  detail::put_bits_be(vec, 0, g.delta_ticks, kDeltaBits);
  return vec;
}

/// Generated dataset CSV: same schema as the input log, flag fixed to T.
/// The timestamp column carries delta ticks as integers, since the generator
/// models inter-frame deltas, not absolute time. Dos16 rows are written in
/// canonical flood-frame shape.
inline void write_generated_csv(std::span<const GeneratedFrame> frames, std::ostream& out) {
  char hex[8];
  for (const auto& g : frames) {
    out << g.delta_ticks << ',';
    const std::uint16_t id = g.mode == BitMode::Dos16 ? 0 : g.can_id;
    std::snprintf(hex, sizeof hex, "%04x", id);
    out << hex << ",8";
    for (std::size_t byte = 0; byte < kPayloadBytes; ++byte) {
      std::snprintf(hex, sizeof hex, "%02x", g.mode == BitMode::Dos16 ? 0 : g.data[byte]);
      out << ',' << hex;
    }
    out << ",T\n";
  }
  if (!out) throw IoError("failed while writing generated CSV");
}

inline std::vector<GeneratedFrame> read_generated_csv(std::istream& in, BitMode mode) {
  ParseOptions opts;
  opts.strict = true;
  opts.max_id = 0xFFFF;  // generated id fields span all 16 encoded bits
  const auto parsed = parse_hcrl_csv(in, opts);
  std::vector<GeneratedFrame> frames;
  frames.reserve(parsed.frames.size());
  for (const auto& f : parsed.frames) {
    const double ticks = f.timestamp;
    if (ticks != std::floor(ticks) || ticks < 0.0 || ticks > double{kMaxDeltaTicks}) {
      throw ValidationError("generated CSV: timestamp column must hold integer ticks 0..65535");
    }
    GeneratedFrame g;
    g.mode = mode;
    g.delta_ticks = static_cast<std::uint16_t>(ticks);
    g.can_id = f.can_id;
    g.data = f.data;
    frames.push_back(g);
  }
  return frames;
}

/// Manifest companion for a generated dataset.
inline void write_generation_manifest(const std::string& model_id_hex, const ModelMeta& meta,
                                      const GenerationConfig& config, std::ostream& out) {
  out << "model_id\t" << model_id_hex << '\n';
  out << "attack_type\t" << to_string(meta.attack_type) << '\n';
  out << "bit_mode\t" << to_string(meta.mode) << '\n';
  out << "scale_factor\t" << meta.scale_factor << '\n';
  out << "count\t" << config.count << '\n';
  out << "gibbs_iters\t" << config.gibbs_iters << '\n';
  out << "seed\t" << config.seed << '\n';
  out << "output_mode\t" << to_string(config.output_mode) << '\n';
}

/// Extend the training partition with windows built from generated frames;
/// validation and test partitions pass through untouched. Generated frames
/// are grouped per class, expanded to Full96 rows, and cut into 27-frame
/// windows labeled with the source model's class (tail dropped).
inline DatasetSplit augment_dataset(
    const DatasetSplit& original,
    const std::map<AttackType, std::vector<GeneratedFrame>>& generated) {
  bool has_normal = false;
  for (const auto& w : original.train) {
    if (w.label == WindowLabel::Normal) {
      has_normal = true;
      break;
    }
  }
  if (!has_normal) {
    throw ValidationError("augment: training set must contain the normal class");
  }

  DatasetSplit augmented = original;
  for (const auto& [type, frames] : generated) {
    const std::size_t n_windows = frames.size() / kWindowWidth;
    for (std::size_t w = 0; w < n_windows; ++w) {
      WindowSample sample;
      sample.bits.reserve(kWindowBits);
      for (std::size_t r = 0; r < kWindowWidth; ++r) {
        const auto row = full96_bitvector(frames[w * kWindowWidth + r]);
        const auto bits = row.bits();
        sample.bits.insert(sample.bits.end(), bits.begin(), bits.end());
      }
      sample.label = label_for(type);
      augmented.train.push_back(std::move(sample));
    }
  }
  return augmented;
}

}  // namespace canrbm
