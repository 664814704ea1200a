#pragma once

// Independent reference implementations used only by tests. They follow the
// defining formulas literally (double loops, two passes) and never call the
// optimized library routines they check.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fcid/tensor.hpp"

namespace fcid::oracle {

inline Tensor2 normalize_rows(const Tensor2& codes) {
  Tensor2 out = codes;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double n = 0.0;
    for (std::size_t k = 0; k < out.cols(); ++k) n += out(i, k) * out(i, k);
    n = std::sqrt(n);
    for (std::size_t k = 0; k < out.cols(); ++k) out(i, k) /= n;
  }
  return out;
}

/// (1/H²) Σ_i Σ_{j≠i} e^i_k e^j_k on normalized rows, O(H²D).
inline std::vector<double> per_dim_similarity(const Tensor2& codes) {
  const Tensor2 e = normalize_rows(codes);
  const std::size_t h = e.rows();
  std::vector<double> s(e.cols(), 0.0);
  for (std::size_t k = 0; k < e.cols(); ++k) {
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < h; ++j)
        if (i != j) s[k] += e(i, k) * e(j, k);
    s[k] /= static_cast<double>(h * h);
  }
  return s;
}

/// Two-pass population variance per column.
inline std::vector<double> per_dim_variance(const Tensor2& codes) {
  std::vector<double> v(codes.cols(), 0.0);
  for (std::size_t k = 0; k < codes.cols(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < codes.rows(); ++i) mean += codes(i, k);
    mean /= static_cast<double>(codes.rows());
    for (std::size_t i = 0; i < codes.rows(); ++i) v[k] += (codes(i, k) - mean) * (codes(i, k) - mean);
    v[k] /= static_cast<double>(codes.rows());
  }
  return v;
}

/// (1/H²) Σ_{i≠j} cos(e^i, e^j), pairwise.
inline double average_cosine(const Tensor2& codes) {
  const std::size_t h = codes.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      if (i == j) continue;
      double dij = 0.0, ni = 0.0, nj = 0.0;
      for (std::size_t k = 0; k < codes.cols(); ++k) {
        dij += codes(i, k) * codes(j, k);
        ni += codes(i, k) * codes(i, k);
        nj += codes(j, k) * codes(j, k);
      }
      total += dij / std::sqrt(ni * nj);
    }
  }
  return total / static_cast<double>(h * h);
}

/// Masked dot-product objective (1/H²) Σ_{i≠j} (e^i⊙F)·(e^j⊙F) on normalized rows.
inline double masked_dot(const Tensor2& codes, const std::vector<int>& flags) {
  const Tensor2 e = normalize_rows(codes);
  const std::size_t h = e.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < e.cols(); ++k)
        if (flags[k]) total += e(i, k) * e(j, k);
    }
  return total / static_cast<double>(h * h);
}

/// Exhaustive minimizer over all q-subsets of D; first minimum in
/// lexicographic enumeration order.
inline std::vector<int> best_subset(const Tensor2& codes, std::size_t q) {
  const std::size_t d = codes.cols();
  std::vector<int> best;
  double best_value = 0.0;
  for (unsigned bits = 0; bits < (1u << d); ++bits) {
    if (static_cast<std::size_t>(__builtin_popcount(bits)) != q) continue;
    std::vector<int> flags(d);
    for (std::size_t k = 0; k < d; ++k) flags[k] = (bits >> k) & 1u;
    const double value = masked_dot(codes, flags);
    if (best.empty() || value < best_value) {
      best = flags;
      best_value = value;
    }
  }
  return best;
}

/// Nearest code by full scan over the selected dims.
inline std::size_t nearest(std::span<const double> f, const Tensor2& codes, const std::vector<int>* flags) {
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t j = 0; j < codes.rows(); ++j) {
    double d = 0.0;
    for (std::size_t k = 0; k < codes.cols(); ++k) {
      if (flags != nullptr && !(*flags)[k]) continue;
      d += (f[k] - codes(j, k)) * (f[k] - codes(j, k));
    }
    if (j == 0 || d < best_d) {
      best = j;
      best_d = d;
    }
  }
  return best;
}

}  // namespace fcid::oracle
