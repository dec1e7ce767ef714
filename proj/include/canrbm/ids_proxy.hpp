// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "canrbm/can_codec.hpp"
#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/generator.hpp"
#include "canrbm/metrics.hpp"
#include "canrbm/model_io.hpp"
#include "canrbm/rbm.hpp"
#include "canrbm/rng.hpp"
#include "canrbm/windows.hpp"

namespace canrbm {

/// Multinomial logistic regression over flattened 27 x 96 windows. A linear
/// model stands in for the image classifiers this pipeline feeds; it keeps
/// the imbalance-vs-augmentation experiment fast while preserving its logic.
struct LinearClassifier {
  std::vector<double> w;  // kNumClasses x kWindowBits, class-major
  std::vector<double> b;  // kNumClasses
  std::uint64_t seed = 0;
  std::size_t epochs = 0;

  double& weight(std::size_t c, std::size_t i) { return w[c * kWindowBits + i]; }
  double weight(std::size_t c, std::size_t i) const { return w[c * kWindowBits + i]; }
};

inline void validate(const LinearClassifier& m) {
  if (m.w.size() != kNumClasses * kWindowBits || m.b.size() != kNumClasses) {
    throw DimensionError("classifier: parameter shape mismatch");
  }
  for (const auto x : m.w) {
    if (!std::isfinite(x)) throw ValidationError("classifier: non-finite weight");
  }
  for (const auto x : m.b) {
    if (!std::isfinite(x)) throw ValidationError("classifier: non-finite bias");
  }
}

struct ClassifierConfig {
  double lr = 0.1;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

inline void validate(const ClassifierConfig& c) {
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) {
    throw ValidationError("classifier config: lr must be positive and finite");
  }
  if (c.batch_size < 1) throw ValidationError("classifier config: batch_size must be >= 1");
}

inline std::array<double, kNumClasses> class_scores(const LinearClassifier& m,
                                                    const WindowSample& window) {
  if (window.bits.size() != kWindowBits) {
    throw DimensionError("class_scores: window bit count mismatch");
  }
  std::array<double, kNumClasses> scores;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double s = m.b[c];
    const double* row = m.w.data() + c * kWindowBits;
    for (std::size_t i = 0; i < kWindowBits; ++i) {
      if (window.bits[i]) s += row[i];
    }
    scores[c] = s;
  }
  return scores;
}

inline std::array<double, kNumClasses> softmax(std::array<double, kNumClasses> scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (auto& s : scores) s /= sum;
  return scores;
}

inline std::array<double, kNumClasses> class_probs(const LinearClassifier& m,
                                                   const WindowSample& window) {
  return softmax(class_scores(m, window));
}

/// Argmax prediction; ties resolve to the lowest class index.
inline WindowLabel predict(const LinearClassifier& m, const WindowSample& window) {
  const auto scores = class_scores(m, window);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<WindowLabel>(best);
}

/// Mini-batch gradient descent on the softmax cross-entropy, zero-initialized
/// (so zero epochs means uniform 0.2 predictions). Deterministic given seed.
inline LinearClassifier train_classifier(std::span<const WindowSample> train,
                                         const ClassifierConfig& config) {
  validate(config);
  if (train.empty()) throw ValidationError("train_classifier: empty training set");
  std::array<bool, kNumClasses> present{};
  std::size_t distinct = 0;
  for (const auto& w : train) {
    validate(w);
    auto& seen = present[static_cast<std::size_t>(w.label)];
    if (!seen) {
      seen = true;
      ++distinct;
    }
  }
  if (distinct < 2) {
    throw ValidationError("train_classifier: need at least 2 classes in training set");
  }

  LinearClassifier model;
  model.w.assign(kNumClasses * kWindowBits, 0.0);
  model.b.assign(kNumClasses, 0.0);
  model.seed = config.seed;
  model.epochs = config.epochs;

  SeededRng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad_w(kNumClasses * kWindowBits);
  std::vector<double> grad_b(kNumClasses);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& sample = train[order[k]];
        const auto probs = class_probs(model, sample);
        const auto y = static_cast<std::size_t>(sample.label);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          const double err = probs[c] - (c == y ? 1.0 : 0.0);
          grad_b[c] += err;
          double* grow = grad_w.data() + c * kWindowBits;
          for (std::size_t i = 0; i < kWindowBits; ++i) {
            if (sample.bits[i]) grow[i] += err;
          }
        }
      }
      const double step = config.lr / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < grad_w.size(); ++i) model.w[i] -= step * grad_w[i];
      for (std::size_t c = 0; c < kNumClasses; ++c) model.b[c] -= step * grad_b[c];
    }
  }
  validate(model);
  return model;
}

inline ClassificationReport evaluate_classifier(const LinearClassifier& model,
                                                std::span<const WindowSample> test) {
  validate(model);
  if (test.empty()) throw ValidationError("evaluate_classifier: empty test set");

  ConfusionTally tally;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassCells cells;
    cells.label = std::string(to_string(static_cast<WindowLabel>(c)));
    tally.classes.push_back(std::move(cells));
  }
  std::vector<std::vector<double>> scores;
  std::vector<std::size_t> labels;
  scores.reserve(test.size());
  labels.reserve(test.size());

  for (const auto& sample : test) {
    const auto probs = class_probs(model, sample);
    scores.emplace_back(probs.begin(), probs.end());
    const auto truth = static_cast<std::size_t>(sample.label);
    labels.push_back(truth);
    const auto guess = static_cast<std::size_t>(predict(model, sample));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      auto& cell = tally.classes[c];
      if (truth == c && guess == c) ++cell.tp;
      else if (truth == c) ++cell.fn;
      else if (guess == c) ++cell.fp;
      else ++cell.tn;
    }
  }

  ClassificationReport report = classification_metrics(tally);
  report.macro_auc = macro_ovr_auc(scores, labels, kNumClasses);
  return report;
}

// --- window image export -----------------------------------------------------

/// Binary portable graymap, 96 wide x 27 tall: row r = frame r of the window,
/// bit 0 -> 0 (black), bit 1 -> 255 (white).
inline void write_window_pgm(const WindowSample& window, std::ostream& out) {
  validate(window);
  out << "P5\n" << kFullFrameBits << ' ' << kWindowWidth << "\n255\n";
  for (const auto bit : window.bits) {
    out.put(bit ? static_cast<char>(0xFF) : '\0');
  }
  if (!out) throw IoError("failed while writing window image");
}

inline std::string window_image_name(std::size_t index, WindowLabel label) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return std::string("window_") + buf + "_" + std::string(to_string(label)) + ".pgm";
}

inline std::vector<std::filesystem::path> export_window_images(
    std::span<const WindowSample> windows, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create image directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  paths.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto path = dir / window_image_name(i, windows[i].label);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open image file: " + path.string());
    write_window_pgm(windows[i], out);
    paths.push_back(path);
  }
  return paths;
}

/// Inverse of write_window_pgm; the label comes from the filename.
inline WindowSample read_window_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path.string());
  std::string magic;
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || magic != "P5") throw ParseError("not a binary graymap", 1);
  if (width != kFullFrameBits || height != kWindowWidth || maxval != 255) {
    throw DimensionError("window image: expected 96 x 27 with maxval 255");
  }
  in.get();  // single whitespace after the header
  WindowSample window;
  window.bits.resize(kWindowBits);
  for (auto& bit : window.bits) {
    const int byte = in.get();
    if (byte == EOF) throw ParseError("truncated graymap payload", 3);
    if (byte != 0 && byte != 0xFF) {
      throw ValidationError("window image: pixel neither 0 nor 255");
    }
    bit = byte ? 1 : 0;
  }

  const auto stem = path.stem().string();
  const auto underscore = stem.rfind('_');
  if (underscore == std::string::npos) {
    throw ValidationError("window image name carries no label: " + stem);
  }
  window.label = parse_window_label(stem.substr(underscore + 1));
  return window;
}

// --- augmentation experiment -------------------------------------------------

struct ExperimentConfig {
  SplitSpec split;
  GenerationConfig gen;
  ClassifierConfig clf;
  std::uint32_t scale_factor = 1'000'000;
};

struct ComparisonReport {
  ClassificationReport before;
  ClassificationReport after;
  std::size_t train_windows_before = 0;
  std::size_t train_windows_after = 0;
  std::uint64_t val_hash = 0;   // same before and after by construction
  std::uint64_t test_hash = 0;
};

struct ExperimentResult {
  ComparisonReport report;
  DatasetSplit split;  // pre-augmentation split, for the split manifest
};

/// Encode every dlc-8 frame of one log and window the result. Injected frames
/// carry the log's attack class; Regular frames stay unlabeled. An attack-free
/// log passes std::nullopt and must contain no Injected frames.
inline std::vector<WindowSample> windows_from_log(std::span<const CanFrame> frames,
                                                  std::optional<AttackType> type,
                                                  std::uint32_t scale_factor) {
  const auto standard = filter_standard_frames(frames);
  if (standard.empty()) throw ValidationError("windows_from_log: no dlc-8 frames");
  const auto deltas = normalize_timestamps(standard, scale_factor);
  std::vector<BitVector> encoded;
  std::vector<FrameClass> classes;
  encoded.reserve(standard.size());
  classes.reserve(standard.size());
  for (std::size_t i = 0; i < standard.size(); ++i) {
    encoded.push_back(encode_frame(standard[i], deltas[i], BitMode::Full96));
    if (standard[i].label == FrameLabel::Injected) {
      if (!type) throw ValidationError("windows_from_log: injected frame in attack-free log");
      classes.emplace_back(*type);
    } else {
      classes.emplace_back();
    }
  }
  return window_frames(encoded, classes);
}

/// The experiment's raw material, mirroring the usual capture layout: one
/// attack-free log for the normal class plus one log per attack class.
struct ExperimentInputs {
  std::vector<CanFrame> normal;
  std::map<AttackType, std::vector<CanFrame>> attacks;
};

/// Before/after comparison: split the pooled windows, train and evaluate on
/// the raw training set, then augment the training set with RBM-generated
/// windows (validation and test untouched) and retrain with the same seed.
inline ExperimentResult augmentation_experiment(
    const ExperimentInputs& inputs, const std::map<AttackType, RbmModel>& models,
    const ExperimentConfig& config) {
  validate(config.split);
  validate(config.gen);
  validate(config.clf);
  if (inputs.attacks.empty()) throw ValidationError("experiment: no attack logs");
  if (models.empty()) throw ValidationError("experiment: no models");

  std::vector<WindowSample> pool;
  if (!inputs.normal.empty()) {
    auto windows = windows_from_log(inputs.normal, std::nullopt, config.scale_factor);
    pool.insert(pool.end(), std::make_move_iterator(windows.begin()),
                std::make_move_iterator(windows.end()));
  }
  for (const auto& [type, frames] : inputs.attacks) {
    auto windows = windows_from_log(frames, type, config.scale_factor);
    pool.insert(pool.end(), std::make_move_iterator(windows.begin()),
                std::make_move_iterator(windows.end()));
  }
  std::array<bool, kNumClasses> present{};
  for (const auto& w : pool) present[static_cast<std::size_t>(w.label)] = true;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!present[c]) {
      throw ValidationError("experiment: class missing from input windows: " +
                            std::string(to_string(static_cast<WindowLabel>(c))));
    }
  }

  ExperimentResult result;
  result.split = split_windows(pool, config.split);
  const auto& split = result.split;

  const auto before_model = train_classifier(split.train, config.clf);
  result.report.before = evaluate_classifier(before_model, split.test);
  result.report.train_windows_before = split.train.size();

  std::map<AttackType, std::vector<GeneratedFrame>> generated;
  std::size_t model_index = 0;
  for (const auto& [type, model] : models) {
    ModelMeta meta;
    meta.attack_type = type;
    meta.mode = mode_for(type);
    meta.scale_factor = config.scale_factor;
    GenerationConfig gen = config.gen;
    gen.seed = derive_seed(config.gen.seed, model_index++);
    generated[type] = generate_frames(model, meta, gen);
  }

  const auto augmented = augment_dataset(split, generated);
  result.report.val_hash = windows_hash(augmented.val);
  result.report.test_hash = windows_hash(augmented.test);
  result.report.train_windows_after = augmented.train.size();

  const auto after_model = train_classifier(augmented.train, config.clf);
  result.report.after = evaluate_classifier(after_model, split.test);
  return result;
}

/// Tab-separated before/after/delta table.
inline void write_comparison_tsv(const ComparisonReport& r, std::ostream& out) {
  const auto row = [&](std::string_view name, double before, double after) {
    out << name << '\t' << before << '\t' << after << '\t' << (after - before) << '\n';
  };
  out << "metric\tbefore\tafter\tdelta\n";
  row("accuracy", r.before.accuracy, r.after.accuracy);
  row("macro_f1", r.before.macro_f1, r.after.macro_f1);
  if (r.before.macro_auc && r.after.macro_auc) {
    row("macro_auc", *r.before.macro_auc, *r.after.macro_auc);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    row(std::string("f1_") + std::string(to_string(static_cast<WindowLabel>(c))),
        r.before.per_class[c].f1, r.after.per_class[c].f1);
  }
  row("train_windows", static_cast<double>(r.train_windows_before),
      static_cast<double>(r.train_windows_after));
}

}  // namespace canrbm
