// SPDX-License-Identifier: Apache-2.0
//
// Correlation spectra and whole-table PCA.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "oprior/core/eigen.hpp"
#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/core/stats.hpp"

namespace oprior::eval {

inline constexpr double kJacobiTolerance = 1e-10;

/// Rows with a NaN in any column are dropped; if fewer than two rows
/// survive, NaNs are replaced by their column mean instead.
inline ColumnTable complete_columns(const Matrix<double>& table) {
  const std::size_t rows = table.rows();
  const std::size_t cols = table.cols();
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < rows; ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < cols && ok; ++c) ok = !std::isnan(table(r, c));
    if (ok) keep.push_back(r);
  }
  ColumnTable out(cols);
  if (keep.size() >= 2) {
    for (std::size_t c = 0; c < cols; ++c) {
      for (auto r : keep) out[c].push_back(table(r, c));
    }
    return out;
  }
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::isnan(table(r, c))) {
        s += table(r, c);
        ++k;
      }
    }
    const double m = k > 0 ? s / static_cast<double>(k) : 0.0;
    for (std::size_t r = 0; r < rows; ++r) out[c].push_back(std::isnan(table(r, c)) ? m : table(r, c));
  }
  return out;
}

/// Eigenvalues of the Pearson correlation matrix of the non-constant
/// columns, descending and clipped at zero.
inline std::vector<double> correlation_spectrum(const Matrix<double>& table) {
  if (table.rows() < 2) throw EvalError("correlation spectrum needs at least two rows");
  const auto cols = complete_columns(table);
  ColumnTable usable;
  for (const auto& c : cols) {
    if (stats::stddev(c) > 0.0) usable.push_back(c);
  }
  const std::size_t p = usable.size();
  if (p < 2) throw EvalError("correlation spectrum needs at least two non-constant columns");
  Matrix<double> corr(p, p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    corr(a, a) = 1.0;
    for (std::size_t b = 0; b < a; ++b) {
      corr(a, b) = corr(b, a) = std::clamp(stats::pearson(usable[a], usable[b]), -1.0, 1.0);
    }
  }
  auto eig = linalg::symmetric_eigen(std::move(corr), kJacobiTolerance);
  for (double& v : eig.values) v = std::max(v, 0.0);
  return eig.values;
}

struct PcaResult {
  Matrix<double> coordinates;           // rows x components
  std::vector<double> explained;        // fraction of total variance per component
  std::vector<double> variances;        // covariance eigenvalues of the kept components
};

/// Centers the table and projects on the top covariance eigenvectors.
inline PcaResult pca_project(const Matrix<double>& table, std::size_t components = 2) {
  if (table.cols() < 2) throw EvalError("PCA needs at least two columns");
  const auto cols = complete_columns(table);
  const std::size_t p = cols.size();
  const std::size_t rows = cols[0].size();
  std::vector<double> mean(p);
  for (std::size_t a = 0; a < p; ++a) mean[a] = stats::mean(cols[a]);
  Matrix<double> cov(p, p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += (cols[a][r] - mean[a]) * (cols[b][r] - mean[b]);
      cov(a, b) = cov(b, a) = rows > 1 ? s / static_cast<double>(rows - 1) : 0.0;
    }
  }
  const auto eig = linalg::symmetric_eigen(std::move(cov), kJacobiTolerance);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  components = std::min(components, p);
  PcaResult res;
  res.coordinates = Matrix<double>(rows, components, 0.0);
  for (std::size_t i = 0; i < components; ++i) {
    const double v = std::max(eig.values[i], 0.0);
    res.variances.push_back(v);
    res.explained.push_back(total > 0.0 ? v / total : 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t a = 0; a < p; ++a) s += (cols[a][r] - mean[a]) * eig.vectors(a, i);
      res.coordinates(r, i) = s;
    }
  }
  return res;
}

}  // namespace oprior::eval
