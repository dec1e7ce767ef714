// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/hashing.hpp"
#include "canrbm/rng.hpp"

namespace canrbm {

inline constexpr std::size_t kWindowWidth = 27;
inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::size_t kWindowBits = kWindowWidth * kFullFrameBits;  // 2592

enum class WindowLabel : std::uint8_t { Normal = 0, Dos = 1, Fuzzy = 2, Gear = 3, Rpm = 4 };

inline std::string_view to_string(WindowLabel label) {
  switch (label) {
    case WindowLabel::Normal: return "normal";
    case WindowLabel::Dos: return "dos";
    case WindowLabel::Fuzzy: return "fuzzy";
    case WindowLabel::Gear: return "gear";
    case WindowLabel::Rpm: return "rpm";
  }
  throw ValidationError("unknown window label");
}

inline WindowLabel parse_window_label(std::string_view text) {
  if (text == "normal") return WindowLabel::Normal;
  if (text == "dos") return WindowLabel::Dos;
  if (text == "fuzzy") return WindowLabel::Fuzzy;
  if (text == "gear") return WindowLabel::Gear;
  if (text == "rpm") return WindowLabel::Rpm;
  throw ValidationError("unknown window label: " + std::string(text));
}

inline WindowLabel label_for(AttackType type) {
  switch (type) {
    case AttackType::Dos: return WindowLabel::Dos;
    case AttackType::Fuzzy: return WindowLabel::Fuzzy;
    case AttackType::Gear: return WindowLabel::Gear;
    case AttackType::Rpm: return WindowLabel::Rpm;
  }
  throw ValidationError("unknown attack type");
}

/// One classification sample: a 27 x 96 bit matrix in row-major order, rows
/// being consecutive encoded frames (row 0 = earliest).
struct WindowSample {
  std::vector<std::uint8_t> bits;  // kWindowBits entries in {0,1}
  WindowLabel label = WindowLabel::Normal;
};

inline void validate(const WindowSample& w) {
  if (w.bits.size() != kWindowBits) {
    throw DimensionError("window sample: expected 2592 bits");
  }
  for (const auto b : w.bits) {
    if (b > 1) throw ValidationError("window sample: bits must be 0 or 1");
  }
}

/// Per-frame class annotation: empty means Regular, a value means Injected
/// with that attack class.
using FrameClass = std::optional<AttackType>;

/// Partition frames into consecutive non-overlapping windows of `width`,
/// dropping the tail. A window containing any Injected frame takes the
/// majority injected class; ties go to the class appearing earliest in the
/// window. All-Regular windows are Normal.
inline std::vector<WindowSample> window_frames(std::span<const BitVector> encoded,
                                               std::span<const FrameClass> frame_classes,
                                               std::size_t width = kWindowWidth) {
  if (encoded.empty()) throw ValidationError("window_frames: no frames");
  if (width == 0) throw ValidationError("window_frames: width must be >= 1");
  if (encoded.size() != frame_classes.size()) {
    throw DimensionError("window_frames: frame/label count mismatch");
  }
  for (const auto& v : encoded) {
    if (v.mode() != BitMode::Full96) {
      throw ValidationError("window_frames: requires Full96 vectors");
    }
  }

  const std::size_t n_windows = encoded.size() / width;
  std::vector<WindowSample> windows;
  windows.reserve(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) {
    WindowSample sample;
    sample.bits.reserve(width * kFullFrameBits);
    std::array<std::size_t, kNumClasses> counts{};
    std::array<std::size_t, kNumClasses> first_pos{};
    first_pos.fill(width);
    for (std::size_t r = 0; r < width; ++r) {
      const std::size_t f = w * width + r;
      const auto row = encoded[f].bits();
      sample.bits.insert(sample.bits.end(), row.begin(), row.end());
      if (frame_classes[f]) {
        const auto c = static_cast<std::size_t>(label_for(*frame_classes[f]));
        ++counts[c];
        first_pos[c] = std::min(first_pos[c], r);
      }
    }
    std::size_t best = 0;  // Normal
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (counts[c] == 0) continue;
      if (best == 0 || counts[c] > counts[best] ||
          (counts[c] == counts[best] && first_pos[c] < first_pos[best])) {
        best = c;
      }
    }
    sample.label = static_cast<WindowLabel>(best);
    windows.push_back(std::move(sample));
  }
  return windows;
}

inline std::uint64_t window_hash(const WindowSample& w) {
  Fnv1a64 h;
  h.update(w.bits.data(), w.bits.size());
  const std::uint8_t lb = static_cast<std::uint8_t>(w.label);
  h.update(&lb, 1);
  return h.value();
}

/// Order-sensitive hash of a window list, used to verify that augmentation
/// leaves the validation and test partitions untouched.
inline std::uint64_t windows_hash(std::span<const WindowSample> windows) {
  Fnv1a64 h;
  h.update(static_cast<std::uint64_t>(windows.size()));
  for (const auto& w : windows) h.update(window_hash(w));
  return h.value();
}

/// Split fractions. Normal and abnormal windows follow different protocols:
/// normal 80/20/0, abnormal 70/20/10 by default.
struct SplitSpec {
  double normal_train = 0.8;
  double normal_val = 0.2;
  double normal_test = 0.0;
  double abnormal_train = 0.7;
  double abnormal_val = 0.2;
  double abnormal_test = 0.1;
  std::uint64_t seed = 0;
};

inline void validate(const SplitSpec& s) {
  const auto check_group = [](double tr, double va, double te, const char* name) {
    for (const double f : {tr, va, te}) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw ValidationError(std::string("split spec: ") + name + " fraction outside [0,1]");
      }
    }
    if (tr + va + te > 1.0 + 1e-9) {
      throw ValidationError(std::string("split spec: ") + name + " fractions exceed 1");
    }
  };
  check_group(s.normal_train, s.normal_val, s.normal_test, "normal");
  check_group(s.abnormal_train, s.abnormal_val, s.abnormal_test, "abnormal");
}

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::vector<WindowSample> test;
  // Original window indices per partition, ascending; drives the split manifest.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::size_t> test_indices;
};

/// Stratified split: windows are grouped by label, each group is shuffled with
/// a seed derived from (spec.seed, group), and partition sizes are floors of
/// the group fractions. Leftover windows from flooring go to training.
inline DatasetSplit split_windows(std::span<const WindowSample> windows, const SplitSpec& spec) {
  validate(spec);
  if (windows.empty()) throw ValidationError("split_windows: no windows");

  std::array<std::vector<std::size_t>, kNumClasses> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    groups[static_cast<std::size_t>(windows[i].label)].push_back(i);
  }

  DatasetSplit split;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& group = groups[c];
    if (group.empty()) continue;
    SeededRng rng(derive_seed(spec.seed, c));
    shuffle(group, rng);

    const bool normal = c == static_cast<std::size_t>(WindowLabel::Normal);
    const double f_tr = normal ? spec.normal_train : spec.abnormal_train;
    const double f_va = normal ? spec.normal_val : spec.abnormal_val;
    const double f_te = normal ? spec.normal_test : spec.abnormal_test;
    const auto n = group.size();
    const auto n_va = static_cast<std::size_t>(f_va * static_cast<double>(n));
    const auto n_te = static_cast<std::size_t>(f_te * static_cast<double>(n));
    auto n_tr = static_cast<std::size_t>(f_tr * static_cast<double>(n));
    n_tr += n - std::min(n, n_tr + n_va + n_te);  // leftover from flooring

    std::size_t p = 0;
    for (std::size_t k = 0; k < n_tr; ++k) split.train_indices.push_back(group[p++]);
    for (std::size_t k = 0; k < n_va; ++k) split.val_indices.push_back(group[p++]);
    for (std::size_t k = 0; k < n_te; ++k) split.test_indices.push_back(group[p++]);
  }

  const auto materialize = [&](std::vector<std::size_t>& idx, std::vector<WindowSample>& out) {
    std::sort(idx.begin(), idx.end());
    out.reserve(idx.size());
    for (const auto i : idx) out.push_back(windows[i]);
  };
  materialize(split.train_indices, split.train);
  materialize(split.val_indices, split.val);
  materialize(split.test_indices, split.test);
  return split;
}

/// Window indices per partition, one line each, for reproducing a split.
inline void write_split_manifest(const DatasetSplit& split, std::ostream& out) {
  out << "partition\twindow_index\n";
  for (const auto i : split.train_indices) out << "train\t" << i << '\n';
  for (const auto i : split.val_indices) out << "val\t" << i << '\n';
  for (const auto i : split.test_indices) out << "test\t" << i << '\n';
}

}  // namespace canrbm
