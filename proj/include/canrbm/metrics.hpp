// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/rng.hpp"

namespace canrbm {

/// Uncentered cosine similarity. Zero vectors have no direction, so they raise
/// instead of silently scoring 0.
inline double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("cosine_similarity: length mismatch");
  if (x.empty()) throw ValidationError("cosine_similarity: empty vectors");
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) {
    throw ValidationError("cosine_similarity: undefined for a zero vector");
  }
  return std::clamp(dot / std::sqrt(xx * yy), -1.0, 1.0);
}

/// Pearson correlation coefficient (centered cosine). Constant vectors have no
/// variance and raise.
inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson_correlation: length mismatch");
  if (x.size() < 2) throw ValidationError("pearson_correlation: need at least 2 entries");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    dot += dx * dy;
    xx += dx * dx;
    yy += dy * dy;
  }
  if (xx == 0.0 || yy == 0.0) {
    throw ValidationError("pearson_correlation: undefined for a constant vector");
  }
  return std::clamp(dot / std::sqrt(xx * yy), -1.0, 1.0);
}

enum class PairingStrategy : std::uint8_t { NearestNeighbor, RandomPairs };

inline std::string_view to_string(PairingStrategy s) {
  return s == PairingStrategy::NearestNeighbor ? "nearest_neighbor" : "random_pairs";
}

/// Dataset-level fidelity between generated and reference bit vectors.
///
/// NearestNeighbor scores each generated vector against its best-cosine
/// reference match; RandomPairs scores each generated vector against a seeded
/// uniform draw. Pearson is computed on the same pairs. Pairs whose cosine
/// (zero vector) or Pearson (constant vector) is undefined are excluded from
/// the corresponding mean and counted.
struct SimilarityReport {
  PairingStrategy strategy = PairingStrategy::NearestNeighbor;
  double mean_cosine = 0.0;
  double mean_pearson = 0.0;
  std::size_t generated_count = 0;
  std::size_t reference_count = 0;
  std::size_t cosine_pairs = 0;    // pairs contributing to mean_cosine
  std::size_t pearson_pairs = 0;   // pairs contributing to mean_pearson
  std::uint64_t seed = 0;          // meaningful for RandomPairs only
};

namespace detail {

inline std::uint32_t popcount_bits(std::span<const std::uint8_t> bits) {
  std::uint32_t n = 0;
  for (const auto b : bits) n += b;
  return n;
}

inline std::uint32_t dot_bits(std::span<const std::uint8_t> x,
                              std::span<const std::uint8_t> y) {
  std::uint32_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += static_cast<std::uint32_t>(x[i] & y[i]);
  return n;
}

inline double binary_cosine(std::uint32_t dot, std::uint32_t px, std::uint32_t py) {
  return static_cast<double>(dot) /
         std::sqrt(static_cast<double>(px) * static_cast<double>(py));
}

// Pearson between two binary vectors from the pair counts alone.
inline std::optional<double> binary_pearson(std::uint32_t dot, std::uint32_t px,
                                            std::uint32_t py, std::size_t n_total) {
  const double n = static_cast<double>(n_total);
  const double sx = static_cast<double>(px);
  const double sy = static_cast<double>(py);
  const double vx = sx * (n - sx);
  const double vy = sy * (n - sy);
  if (vx == 0.0 || vy == 0.0) return std::nullopt;
  const double cov = n * static_cast<double>(dot) - sx * sy;
  return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

}  // namespace detail

inline SimilarityReport dataset_similarity_report(std::span<const BitVector> generated,
                                                  std::span<const BitVector> reference,
                                                  PairingStrategy strategy,
                                                  std::uint64_t seed = 0) {
  if (generated.empty() || reference.empty()) {
    throw ValidationError("similarity report: both vector sets must be nonempty");
  }
  const BitMode mode = generated.front().mode();
  for (const auto& v : generated) {
    if (v.mode() != mode) throw ValidationError("similarity report: mixed modes in generated set");
  }
  for (const auto& v : reference) {
    if (v.mode() != mode) throw ValidationError("similarity report: mode mismatch between sets");
  }
  const std::size_t nbits = bit_length(mode);

  std::vector<std::uint32_t> ref_pop(reference.size());
  for (std::size_t r = 0; r < reference.size(); ++r) {
    ref_pop[r] = detail::popcount_bits(reference[r].bits());
  }

  SimilarityReport report;
  report.strategy = strategy;
  report.generated_count = generated.size();
  report.reference_count = reference.size();
  report.seed = seed;

  SeededRng rng(seed);
  double cos_sum = 0.0, pear_sum = 0.0;
  for (const auto& g : generated) {
    const std::uint32_t gpop = detail::popcount_bits(g.bits());
    std::size_t pick = 0;
    std::uint32_t pick_dot = 0;
    bool have_pick = false;

    if (strategy == PairingStrategy::RandomPairs) {
      pick = rng.uniform_index(reference.size());
      pick_dot = detail::dot_bits(g.bits(), reference[pick].bits());
      have_pick = gpop > 0 && ref_pop[pick] > 0;
    } else {
      // Best cosine match; ties keep the earliest reference.
      double best = -1.0;
      for (std::size_t r = 0; r < reference.size(); ++r) {
        if (gpop == 0 || ref_pop[r] == 0) continue;
        const std::uint32_t dot = detail::dot_bits(g.bits(), reference[r].bits());
        const double cs = detail::binary_cosine(dot, gpop, ref_pop[r]);
        if (cs > best) {
          best = cs;
          pick = r;
          pick_dot = dot;
          have_pick = true;
        }
      }
    }

    if (!have_pick) continue;  // undefined cosine for this pair
    cos_sum += detail::binary_cosine(pick_dot, gpop, ref_pop[pick]);
    ++report.cosine_pairs;
    const auto pear = detail::binary_pearson(pick_dot, gpop, ref_pop[pick], nbits);
    if (pear) {
      pear_sum += *pear;
      ++report.pearson_pairs;
    }
  }

  if (report.cosine_pairs == 0) {
    throw ValidationError("similarity report: no scorable pairs (all-zero vectors)");
  }
  report.mean_cosine = cos_sum / static_cast<double>(report.cosine_pairs);
  report.mean_pearson =
      report.pearson_pairs ? pear_sum / static_cast<double>(report.pearson_pairs) : 0.0;
  return report;
}

/// Tab-separated table, one row per (strategy, metric) pair.
inline void write_similarity_tsv(std::span<const SimilarityReport> reports, std::ostream& out) {
  out << "strategy\tmetric\tvalue\n";
  for (const auto& r : reports) {
    const auto name = to_string(r.strategy);
    out << name << "\tmean_cosine\t" << r.mean_cosine << '\n';
    out << name << "\tmean_pearson\t" << r.mean_pearson << '\n';
    out << name << "\tgenerated_count\t" << r.generated_count << '\n';
    out << name << "\treference_count\t" << r.reference_count << '\n';
    out << name << "\tcosine_pairs\t" << r.cosine_pairs << '\n';
    out << name << "\tpearson_pairs\t" << r.pearson_pairs << '\n';
  }
}

// --- classification metrics --------------------------------------------------

struct ClassCells {
  std::string label;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct ConfusionTally {
  std::vector<ClassCells> classes;
};

inline void validate(const ConfusionTally& t) {
  if (t.classes.empty()) throw ValidationError("confusion tally: no classes");
  const std::size_t total = t.classes.front().total();
  if (total == 0) throw ValidationError("confusion tally: zero evaluated items");
  for (const auto& c : t.classes) {
    if (c.total() != total) {
      throw ValidationError("confusion tally: class totals disagree");
    }
  }
}

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero and the 0-convention applied
};

struct ClassificationReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  std::optional<double> macro_auc;  // filled by evaluations that have scores
};

/// Accuracy, precision, recall, F1 from counts. Zero-denominator cells follow
/// the 0-convention and set the degenerate flag. With a single class the
/// accuracy is the binary (TP+TN)/N; with several one-vs-rest classes it is
/// the multiclass sum(TP)/N.
inline ClassificationReport classification_metrics(const ConfusionTally& tally) {
  validate(tally);
  const double total = static_cast<double>(tally.classes.front().total());

  ClassificationReport report;
  if (tally.classes.size() == 1) {
    const auto& c = tally.classes.front();
    report.accuracy = static_cast<double>(c.tp + c.tn) / total;
  } else {
    std::size_t tp_sum = 0;
    for (const auto& c : tally.classes) tp_sum += c.tp;
    report.accuracy = static_cast<double>(tp_sum) / total;
  }

  double f1_sum = 0.0;
  for (const auto& c : tally.classes) {
    ClassMetrics m;
    m.label = c.label;
    if (c.tp + c.fp == 0) {
      m.precision = 0.0;
      m.degenerate = true;
    } else {
      m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
      m.recall = 0.0;
      m.degenerate = true;
    } else {
      m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (m.precision + m.recall == 0.0) {
      m.f1 = 0.0;
      m.degenerate = m.degenerate || c.tp == 0;
    } else {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    f1_sum += m.f1;
    report.per_class.push_back(std::move(m));
  }
  report.macro_f1 = f1_sum / static_cast<double>(tally.classes.size());
  return report;
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counted half.
inline double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: length mismatch");
  if (scores.empty()) throw ValidationError("roc_auc: empty input");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return scores[l] < scores[r]; });

  // Tie-averaged ranks.
  std::vector<double> rank(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mean_rank;
    i = j + 1;
  }

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k]) {
      pos_rank_sum += rank[k];
      ++n_pos;
    }
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("roc_auc: both classes must be present");
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// One-vs-rest macro average over classes that have both positives and
/// negatives in `labels`; nullopt when no class qualifies.
inline std::optional<double> macro_ovr_auc(const std::vector<std::vector<double>>& class_scores,
                                           std::span<const std::size_t> labels,
                                           std::size_t n_classes) {
  if (class_scores.size() != labels.size()) throw DimensionError("macro_ovr_auc: length mismatch");
  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> scores(labels.size());
  std::vector<std::uint8_t> binary(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      scores[k] = class_scores[k][c];
      binary[k] = labels[k] == c ? 1 : 0;
      pos += binary[k];
    }
    if (pos == 0 || pos == labels.size()) continue;
    total += roc_auc(scores, binary);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

/// Tab-separated classification report: scope, metric, value.
inline void write_classification_tsv(const ClassificationReport& r, std::ostream& out) {
  out << "scope\tmetric\tvalue\n";
  out << "overall\taccuracy\t" << r.accuracy << '\n';
  out << "overall\tmacro_f1\t" << r.macro_f1 << '\n';
  if (r.macro_auc) out << "overall\tmacro_auc\t" << *r.macro_auc << '\n';
  for (const auto& c : r.per_class) {
    out << c.label << "\tprecision\t" << c.precision << '\n';
    out << c.label << "\trecall\t" << c.recall << '\n';
    out << c.label << "\tf1\t" << c.f1 << '\n';
    if (c.degenerate) out << c.label << "\tdegenerate\t1\n";
  }
}

}  // namespace canrbm
