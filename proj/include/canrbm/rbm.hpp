// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/frame.hpp"
#include "canrbm/rng.hpp"

namespace canrbm {

/// Bernoulli-Bernoulli RBM. Weights are stored visible-major: weight(i, j)
/// couples visible unit i with hidden unit j. That convention is used
/// everywhere in this library.
struct RbmModel {
  std::size_t kv = 0;      // visible units
  std::size_t kh = 0;      // hidden units
  std::vector<double> a;   // visible biases, length kv
  std::vector<double> b;   // hidden biases, length kh
  std::vector<double> w;   // weights, kv x kh, row-major

  double weight(std::size_t i, std::size_t j) const { return w[i * kh + j]; }
  double& weight(std::size_t i, std::size_t j) { return w[i * kh + j]; }

  std::size_t parameter_count() const { return kv + kh + kv * kh; }
};

inline void validate(const RbmModel& m) {
  if (m.kv == 0 || m.kh == 0) throw ValidationError("model: layer sizes must be positive");
  if (m.a.size() != m.kv || m.b.size() != m.kh || m.w.size() != m.kv * m.kh) {
    throw DimensionError("model: parameter shapes disagree with layer sizes");
  }
  for (const double x : m.a)
    if (!std::isfinite(x)) throw ValidationError("model: non-finite visible bias");
  for (const double x : m.b)
    if (!std::isfinite(x)) throw ValidationError("model: non-finite hidden bias");
  for (const double x : m.w)
    if (!std::isfinite(x)) throw ValidationError("model: non-finite weight");
}

/// Biases start at zero; weights are i.i.d. zero-mean Gaussian with standard
/// deviation init_sigma, deterministic given the seed.
inline RbmModel init_rbm(std::size_t kv, std::size_t kh, std::uint64_t seed,
                         double init_sigma) {
  if (kv == 0 || kh == 0) throw ValidationError("init_rbm: layer sizes must be positive");
  if (init_sigma < 0.0 || !std::isfinite(init_sigma)) {
    throw ValidationError("init_rbm: init_sigma must be nonnegative");
  }
  RbmModel m;
  m.kv = kv;
  m.kh = kh;
  m.a.assign(kv, 0.0);
  m.b.assign(kh, 0.0);
  m.w.assign(kv * kh, 0.0);
  if (init_sigma > 0.0) {
    SeededRng rng(seed);
    for (auto& x : m.w) x = init_sigma * rng.gaussian();
  }
  return m;
}

namespace detail {

inline void check_visible(const RbmModel& m, std::span<const std::uint8_t> v) {
  if (v.size() != m.kv) {
    throw DimensionError("visible vector has " + std::to_string(v.size()) +
                         " entries, model expects " + std::to_string(m.kv));
  }
}

inline void check_hidden(const RbmModel& m, std::span<const std::uint8_t> h) {
  if (h.size() != m.kh) {
    throw DimensionError("hidden vector has " + std::to_string(h.size()) +
                         " entries, model expects " + std::to_string(m.kh));
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// E(v, h) = -a'v - b'h - v'Wh.
inline double energy(const RbmModel& m, std::span<const std::uint8_t> v,
                     std::span<const std::uint8_t> h) {
  detail::check_visible(m, v);
  detail::check_hidden(m, h);
  double e = 0.0;
  for (std::size_t i = 0; i < m.kv; ++i) {
    if (!v[i]) continue;
    e += m.a[i];
    const double* row = m.w.data() + i * m.kh;
    for (std::size_t j = 0; j < m.kh; ++j) {
      if (h[j]) e += row[j];
    }
  }
  for (std::size_t j = 0; j < m.kh; ++j) {
    if (h[j]) e += m.b[j];
  }
  return -e;
}

/// p(h_j = 1 | v) = sigmoid(b_j + sum_i w(i,j) v_i), elementwise.
inline std::vector<double> hidden_probs(const RbmModel& m, std::span<const std::uint8_t> v) {
  detail::check_visible(m, v);
  std::vector<double> act(m.b.begin(), m.b.end());
  for (std::size_t i = 0; i < m.kv; ++i) {
    if (!v[i]) continue;
    const double* row = m.w.data() + i * m.kh;
    for (std::size_t j = 0; j < m.kh; ++j) act[j] += row[j];
  }
  for (auto& x : act) x = detail::sigmoid(x);
  return act;
}

/// p(v_i = 1 | h) = sigmoid(a_i + sum_j w(i,j) h_j), elementwise.
inline std::vector<double> visible_probs(const RbmModel& m, std::span<const std::uint8_t> h) {
  detail::check_hidden(m, h);
  std::vector<double> act(m.a.begin(), m.a.end());
  for (std::size_t j = 0; j < m.kh; ++j) {
    if (!h[j]) continue;
    for (std::size_t i = 0; i < m.kv; ++i) act[i] += m.w[i * m.kh + j];
  }
  for (auto& x : act) x = detail::sigmoid(x);
  return act;
}

/// Independent Bernoulli draws, one per probability.
inline std::vector<std::uint8_t> sample_bits(std::span<const double> probs, SeededRng& rng) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("sample_bits: probability out of [0,1]");
    }
    out[i] = rng.bernoulli(p) ? 1 : 0;
  }
  return out;
}

struct GibbsState {
  std::vector<std::uint8_t> visible;
  std::vector<std::uint8_t> hidden;
};

/// Alternates sample-h-given-v then sample-v-given-h, `steps` times, starting
/// from v0.
inline GibbsState gibbs_chain(const RbmModel& m, std::span<const std::uint8_t> v0,
                              std::size_t steps, SeededRng& rng) {
  detail::check_visible(m, v0);
  if (steps == 0) throw ValidationError("gibbs_chain: steps must be >= 1");
  GibbsState state;
  state.visible.assign(v0.begin(), v0.end());
  for (std::size_t s = 0; s < steps; ++s) {
    state.hidden = sample_bits(hidden_probs(m, state.visible), rng);
    state.visible = sample_bits(visible_probs(m, state.hidden), rng);
  }
  return state;
}

struct TrainConfig {
  double eta = 0.1;            // learning rate
  std::size_t epochs = 30;
  std::size_t cd_k = 1;        // Gibbs steps per update
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double init_sigma = 0.01;    // used by callers that initialize and train together
};

inline void validate(const TrainConfig& c) {
  if (!(c.eta >= 0.0) || !std::isfinite(c.eta)) {
    throw ValidationError("train config: eta must be finite and nonnegative");
  }
  if (c.epochs == 0) throw ValidationError("train config: epochs must be >= 1");
  if (c.cd_k == 0) throw ValidationError("train config: cd_k must be >= 1");
  if (c.batch_size == 0) throw ValidationError("train config: batch_size must be >= 1");
  if (c.init_sigma < 0.0 || !std::isfinite(c.init_sigma)) {
    throw ValidationError("train config: init_sigma must be nonnegative");
  }
}

struct TrainReport {
  std::vector<double> epoch_errors;  // mean per-bit reconstruction Hamming error
  std::size_t epochs_completed = 0;
};

/// One CD-k step for a single data vector, without the learning rate applied.
///
/// Both phases use hidden activation probabilities in the weight and hidden
/// bias statistics: the positive phase pairs v with p(h|v), the negative phase
/// pairs the reconstruction v' with p(h|v'). The visible statistics use the
/// binary states v and v'.
struct CdUpdate {
  std::vector<double> da;  // v - v'
  std::vector<double> db;  // p_h - p_h'
  std::vector<double> dw;  // v p_h - v' p_h', visible-major
  std::size_t hamming = 0; // bits differing between v and v'
};

inline CdUpdate compute_cd_update(const RbmModel& m, std::span<const std::uint8_t> v,
                                  std::size_t cd_k, SeededRng& rng) {
  detail::check_visible(m, v);
  if (cd_k == 0) throw ValidationError("cd_k must be >= 1");

  const std::vector<double> ph_pos = hidden_probs(m, v);
  std::vector<std::uint8_t> h = sample_bits(ph_pos, rng);

  std::vector<std::uint8_t> v_neg;
  std::vector<double> ph_neg;
  for (std::size_t k = 0; k < cd_k; ++k) {
    v_neg = sample_bits(visible_probs(m, h), rng);
    ph_neg = hidden_probs(m, v_neg);
    if (k + 1 < cd_k) h = sample_bits(ph_neg, rng);
  }

  CdUpdate up;
  up.da.resize(m.kv);
  up.db.resize(m.kh);
  up.dw.assign(m.kv * m.kh, 0.0);
  for (std::size_t i = 0; i < m.kv; ++i) {
    up.da[i] = static_cast<double>(v[i]) - static_cast<double>(v_neg[i]);
    if (v[i] != v_neg[i]) ++up.hamming;
  }
  for (std::size_t j = 0; j < m.kh; ++j) up.db[j] = ph_pos[j] - ph_neg[j];
  for (std::size_t i = 0; i < m.kv; ++i) {
    double* row = up.dw.data() + i * m.kh;
    if (v[i]) {
      for (std::size_t j = 0; j < m.kh; ++j) row[j] += ph_pos[j];
    }
    if (v_neg[i]) {
      for (std::size_t j = 0; j < m.kh; ++j) row[j] -= ph_neg[j];
    }
  }
  return up;
}

namespace detail {

inline TrainReport train_cd_views(RbmModel& m,
                                  std::span<const std::span<const std::uint8_t>> data,
                                  const TrainConfig& cfg) {
  validate(cfg);
  validate(m);
  if (data.empty()) throw ValidationError("train_cd: dataset is empty");
  for (const auto& v : data) check_visible(m, v);

  SeededRng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  std::vector<double> acc_a(m.kv), acc_b(m.kh), acc_w(m.kv * m.kh);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    std::size_t hamming_total = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(acc_a.begin(), acc_a.end(), 0.0);
      std::fill(acc_b.begin(), acc_b.end(), 0.0);
      std::fill(acc_w.begin(), acc_w.end(), 0.0);

      for (std::size_t k = start; k < end; ++k) {
        const CdUpdate up = compute_cd_update(m, data[order[k]], cfg.cd_k, rng);
        hamming_total += up.hamming;
        for (std::size_t i = 0; i < m.kv; ++i) acc_a[i] += up.da[i];
        for (std::size_t j = 0; j < m.kh; ++j) acc_b[j] += up.db[j];
        for (std::size_t i = 0; i < acc_w.size(); ++i) acc_w[i] += up.dw[i];
      }

      const double step = cfg.eta * inv;
      for (std::size_t i = 0; i < m.kv; ++i) m.a[i] += step * acc_a[i];
      for (std::size_t j = 0; j < m.kh; ++j) m.b[j] += step * acc_b[j];
      for (std::size_t i = 0; i < acc_w.size(); ++i) m.w[i] += step * acc_w[i];
    }

    report.epoch_errors.push_back(static_cast<double>(hamming_total) /
                                  (static_cast<double>(data.size()) *
                                   static_cast<double>(m.kv)));
    ++report.epochs_completed;
  }
  return report;
}

}  // namespace detail

/// Contrastive Divergence training over raw {0,1} vectors. Mini-batches apply
/// the mean of the per-sample updates; batch_size = 1 recovers the per-sample
/// loop. Deterministic given cfg.seed.
inline TrainReport train_cd(RbmModel& m, const std::vector<std::vector<std::uint8_t>>& data,
                            const TrainConfig& cfg) {
  std::vector<std::span<const std::uint8_t>> views;
  views.reserve(data.size());
  for (const auto& v : data) views.emplace_back(v);
  return detail::train_cd_views(m, views, cfg);
}

inline TrainReport train_cd(RbmModel& m, const EncodedDataset& ds, const TrainConfig& cfg) {
  if (bit_length(ds.mode()) != m.kv) {
    throw DimensionError("train_cd: dataset mode length does not match model kv");
  }
  std::vector<std::span<const std::uint8_t>> views;
  views.reserve(ds.vectors.size());
  for (const auto& v : ds.vectors) views.emplace_back(v.bits());
  return detail::train_cd_views(m, views, cfg);
}

}  // namespace canrbm
