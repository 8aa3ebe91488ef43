#pragma once

#include <cmath>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Correlation matrix of the columns of X (rows = observations), built with
/// plain loops and the n-1 denominator.
inline Matrix correlation(const Matrix& X) {
  const std::size_t n = X.size(), d = X[0].size();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& r : X)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
  for (const auto& r : X)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  for (auto& s : sd) s = std::sqrt(s / (n - 1));
  Matrix C(d, std::vector<double>(d, 0.0));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double s = 0;
      for (const auto& r : X) s += (r[a] - mean[a]) / sd[a] * (r[b] - mean[b]) / sd[b];
      C[a][b] = s / (n - 1);
    }
  return C;
}

/// Eigenvalues of a symmetric positive semi-definite matrix, largest first,
/// by power iteration with Hotelling deflation.
inline std::vector<double> power_eigenvalues(Matrix A, std::size_t count, int iters = 20000) {
  const std::size_t d = A.size();
  std::vector<double> out;
  for (std::size_t e = 0; e < count; ++e) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.01 * static_cast<double>((i * 7919 + e * 104729) % 97);
    double lambda = 0;
    for (int it = 0; it < iters; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) w[i] += A[i][j] * v[j];
      double norm = 0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0) break;
      for (std::size_t i = 0; i < d; ++i) w[i] /= norm;
      double next = 0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) next += w[i] * A[i][j] * w[j];
      const bool done = std::abs(next - lambda) <= 1e-15 * std::abs(next);
      lambda = next;
      v = w;
      if (done && it > 50) break;
    }
    out.push_back(lambda);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) A[i][j] -= lambda * v[i] * v[j];
  }
  return out;
}

}  // namespace oracle
