// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "canrbm/errors.hpp"
#include "canrbm/rbm.hpp"

namespace canrbm {

constexpr std::size_t kMaxEnumerationBits = 20;

/// Exhaustive enumeration of p(v, h) for models with kv + kh <= 20. Joint
/// probabilities are indexed by (v_index << kh) | h_index, where bit u of a
/// state index is the value of unit u.
struct ExactDistribution {
  std::size_t kv = 0;
  std::size_t kh = 0;
  double log_z = 0.0;
  std::vector<double> joint;             // size 1 << (kv + kh)
  std::vector<double> visible_marginal;  // size 1 << kv

  double joint_prob(std::size_t v_index, std::size_t h_index) const {
    return joint[(v_index << kh) | h_index];
  }
};

namespace detail {

inline void index_to_bits(std::size_t index, std::span<std::uint8_t> out) {
  for (std::size_t u = 0; u < out.size(); ++u) out[u] = (index >> u) & 1U;
}

inline std::size_t bits_to_index(std::span<const std::uint8_t> bits) {
  std::size_t index = 0;
  for (std::size_t u = 0; u < bits.size(); ++u) {
    if (bits[u]) index |= std::size_t{1} << u;
  }
  return index;
}

// Compensated (Kahan) accumulator.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

inline void check_enumerable(const RbmModel& m) {
  if (m.kv + m.kh > kMaxEnumerationBits) {
    throw ValidationError("model too large to enumerate: kv + kh = " +
                          std::to_string(m.kv + m.kh) + " exceeds " +
                          std::to_string(kMaxEnumerationBits));
  }
}

}  // namespace detail

inline ExactDistribution exact_distribution(const RbmModel& m) {
  validate(m);
  detail::check_enumerable(m);

  ExactDistribution dist;
  dist.kv = m.kv;
  dist.kh = m.kh;
  const std::size_t n_states = std::size_t{1} << (m.kv + m.kh);
  dist.joint.resize(n_states);
  dist.visible_marginal.assign(std::size_t{1} << m.kv, 0.0);

  std::vector<std::uint8_t> v(m.kv), h(m.kh);
  double max_neg_energy = -std::numeric_limits<double>::infinity();
  for (std::size_t vi = 0; vi < (std::size_t{1} << m.kv); ++vi) {
    detail::index_to_bits(vi, v);
    for (std::size_t hi = 0; hi < (std::size_t{1} << m.kh); ++hi) {
      detail::index_to_bits(hi, h);
      const double neg_e = -energy(m, v, h);
      dist.joint[(vi << m.kh) | hi] = neg_e;  // staged, normalized below
      if (neg_e > max_neg_energy) max_neg_energy = neg_e;
    }
  }

  detail::KahanSum z_scaled;
  for (auto& x : dist.joint) {
    x = std::exp(x - max_neg_energy);
    z_scaled.add(x);
  }
  dist.log_z = max_neg_energy + std::log(z_scaled.sum);

  const double inv_z = 1.0 / z_scaled.sum;
  for (std::size_t vi = 0; vi < (std::size_t{1} << m.kv); ++vi) {
    detail::KahanSum row;
    for (std::size_t hi = 0; hi < (std::size_t{1} << m.kh); ++hi) {
      double& p = dist.joint[(vi << m.kh) | hi];
      p *= inv_z;
      row.add(p);
    }
    dist.visible_marginal[vi] = row.sum;
  }
  return dist;
}

/// Exact mean log-likelihood of the visible vectors under the model.
inline double exact_mean_loglik(const RbmModel& m,
                                const std::vector<std::vector<std::uint8_t>>& data) {
  if (data.empty()) throw ValidationError("exact_mean_loglik: dataset is empty");
  const ExactDistribution dist = exact_distribution(m);
  double total = 0.0;
  for (const auto& v : data) {
    detail::check_visible(m, v);
    total += std::log(dist.visible_marginal[detail::bits_to_index(v)]);
  }
  return total / static_cast<double>(data.size());
}

struct GradientTriple {
  std::vector<double> a;  // d/da, length kv
  std::vector<double> b;  // d/db, length kh
  std::vector<double> w;  // d/dw, kv x kh visible-major
};

/// Exact gradient of the mean log-likelihood over weighted visible vectors:
/// data expectation of the sufficient statistics minus the model expectation,
/// the latter taken from full enumeration.
inline GradientTriple exact_loglik_gradient(const RbmModel& m,
                                            const std::vector<std::vector<std::uint8_t>>& data,
                                            std::span<const double> weights = {}) {
  validate(m);
  detail::check_enumerable(m);
  if (data.empty()) throw ValidationError("exact_loglik_gradient: dataset is empty");
  if (!weights.empty() && weights.size() != data.size()) {
    throw DimensionError("exact_loglik_gradient: weight count does not match dataset");
  }

  GradientTriple g;
  g.a.assign(m.kv, 0.0);
  g.b.assign(m.kh, 0.0);
  g.w.assign(m.kv * m.kh, 0.0);

  // Data term: E_data[v_i], E_data[p(h_j=1|v)], E_data[v_i p(h_j=1|v)].
  double weight_total = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& v = data[n];
    detail::check_visible(m, v);
    const double wgt = weights.empty() ? 1.0 : weights[n];
    weight_total += wgt;
    const std::vector<double> ph = hidden_probs(m, v);
    for (std::size_t i = 0; i < m.kv; ++i) {
      if (!v[i]) continue;
      g.a[i] += wgt;
      double* row = g.w.data() + i * m.kh;
      for (std::size_t j = 0; j < m.kh; ++j) row[j] += wgt * ph[j];
    }
    for (std::size_t j = 0; j < m.kh; ++j) g.b[j] += wgt * ph[j];
  }
  if (weight_total <= 0.0) throw ValidationError("exact_loglik_gradient: weights sum to zero");
  const double inv_total = 1.0 / weight_total;
  for (auto& x : g.a) x *= inv_total;
  for (auto& x : g.b) x *= inv_total;
  for (auto& x : g.w) x *= inv_total;

  // Model term: expectations of the same statistics under p(v, h).
  const ExactDistribution dist = exact_distribution(m);
  std::vector<std::uint8_t> v(m.kv), h(m.kh);
  for (std::size_t vi = 0; vi < (std::size_t{1} << m.kv); ++vi) {
    detail::index_to_bits(vi, v);
    for (std::size_t hi = 0; hi < (std::size_t{1} << m.kh); ++hi) {
      detail::index_to_bits(hi, h);
      const double p = dist.joint[(vi << m.kh) | hi];
      for (std::size_t i = 0; i < m.kv; ++i) {
        if (!v[i]) continue;
        g.a[i] -= p;
        double* row = g.w.data() + i * m.kh;
        for (std::size_t j = 0; j < m.kh; ++j) {
          if (h[j]) row[j] -= p;
        }
      }
      for (std::size_t j = 0; j < m.kh; ++j) {
        if (h[j]) g.b[j] -= p;
      }
    }
  }
  return g;
}

}  // namespace canrbm
