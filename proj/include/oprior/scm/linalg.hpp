// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "oprior/core/matrix.hpp"

namespace oprior::linalg {

/// Dot product with four independent accumulators so the loop vectorizes
/// without relaxed floating-point flags.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

/// In-place lower Cholesky factor of a symmetric matrix (row-major, only the
/// lower triangle is read). Returns false when a pivot is not positive.
inline bool cholesky_in_place(Matrix<double>& a) {
  const std::size_t n = a.rows();
  double* data = a.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row_i = data + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double* row_j = data + j * n;
      row_i[j] = (row_i[j] - dot(row_i, row_j, j)) / row_j[j];
    }
    const double d = row_i[i] - dot(row_i, row_i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    row_i[i] = std::sqrt(d);
    for (std::size_t j = i + 1; j < n; ++j) row_i[j] = 0.0;
  }
  return true;
}

/// RBF kernel value for squared distance d2 and lengthscale ell.
inline double rbf(double d2, double ell) { return std::exp(-d2 / (2.0 * ell * ell)); }

/// Kernel matrix K_ts = rbf(|x_t - x_s|^2) + jitter * [t == s] over row vectors
/// given as columns.
inline Matrix<double> rbf_kernel_matrix(const ColumnTable& inputs, std::size_t rows, double ell, double jitter) {
  Matrix<double> k(rows, rows);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t s = 0; s < t; ++s) {
      double d2 = 0.0;
      for (const auto& col : inputs) {
        const double diff = col[t] - col[s];
        d2 += diff * diff;
      }
      const double v = rbf(d2, ell);
      k(t, s) = v;
      k(s, t) = v;
    }
    k(t, t) = 1.0 + jitter;
  }
  return k;
}

struct JitteredCholesky {
  Matrix<double> factor;
  double jitter = 0.0;
};

/// Cholesky with the jitter ladder 1e-8, 1e-7, ..., 1e-4 added to the diagonal.
/// The kernel's unit diagonal is rewritten as 1 + jitter at every rung.
inline std::optional<JitteredCholesky> cholesky_with_jitter(const Matrix<double>& kernel) {
  for (double jitter = 1e-8; jitter <= 1e-4 * 1.0000001; jitter *= 10.0) {
    Matrix<double> a = kernel;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) = 1.0 + jitter;
    if (cholesky_in_place(a)) return JitteredCholesky{std::move(a), jitter};
  }
  return std::nullopt;
}

/// y = L z for a lower-triangular factor L.
inline std::vector<double> lower_times(const Matrix<double>& lower, std::span<const double> z) {
  const std::size_t n = lower.rows();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = dot(lower.row(i).data(), z.data(), i + 1);
  return y;
}

/// Least-squares solve via normal equations with Cholesky; columns are the
/// regressors. Returns nullopt when the Gram matrix is singular.
inline std::optional<std::vector<double>> least_squares(const ColumnTable& regressors, std::span<const double> y) {
  const std::size_t p = regressors.size();
  Matrix<double> gram(p, p);
  std::vector<double> rhs(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      gram(i, j) = dot(regressors[i].data(), regressors[j].data(), y.size());
      gram(j, i) = gram(i, j);
    }
    rhs[i] = dot(regressors[i].data(), y.data(), y.size());
  }
  if (!cholesky_in_place(gram)) return std::nullopt;
  std::vector<double> z(p);
  for (std::size_t i = 0; i < p; ++i) {
    double s = rhs[i];
    for (std::size_t j = 0; j < i; ++j) s -= gram(i, j) * z[j];
    z[i] = s / gram(i, i);
  }
  std::vector<double> beta(p);
  for (std::size_t i = p; i-- > 0;) {
    double s = z[i];
    for (std::size_t j = i + 1; j < p; ++j) s -= gram(j, i) * beta[j];
    beta[i] = s / gram(i, i);
  }
  return beta;
}

}  // namespace oprior::linalg
