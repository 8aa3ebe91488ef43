#pragma once

#include <algorithm>
#include <vector>

namespace oracle {

struct Stump {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

/// Tries every (feature, midpoint between adjacent distinct values) pair.
/// `gain_of(left_rows, right_rows)` scores a split; the first strict maximum
/// wins, so ties go to the lowest feature and then the lowest threshold.
template <class Gain>
Stump exhaustive_stump(const std::vector<std::vector<double>>& X, Gain&& gain_of) {
  const std::size_t n = X.size(), d = X[0].size();
  Stump best;
  bool have = false;
  for (std::size_t f = 0; f < d; ++f) {
    std::vector<double> vals;
    for (const auto& r : X) vals.push_back(r[f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = (vals[k] + vals[k + 1]) / 2;
      std::vector<std::size_t> left, right;
      for (std::size_t i = 0; i < n; ++i) (X[i][f] <= t ? left : right).push_back(i);
      const double g = gain_of(left, right);
      if (!have || g > best.gain) {
        best = {static_cast<int>(f), t, g};
        have = true;
      }
    }
  }
  return best;
}

/// n * Gini(parent) - nL * Gini(left) - nR * Gini(right).
inline auto gini_decrease(const std::vector<int>& y) {
  return [&y](const std::vector<std::size_t>& l, const std::vector<std::size_t>& r) {
    auto weighted_gini = [&](const std::vector<std::size_t>& rows) {
      if (rows.empty()) return 0.0;
      double pos = 0;
      for (auto i : rows) pos += y[i];
      const double p = pos / rows.size();
      return rows.size() * (1 - p * p - (1 - p) * (1 - p));
    };
    std::vector<std::size_t> all = l;
    all.insert(all.end(), r.begin(), r.end());
    return weighted_gini(all) - weighted_gini(l) - weighted_gini(r);
  };
}

/// Regularized second-order gain
/// 1/2 [GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)] - gamma.
inline auto newton_gain(const std::vector<double>& g, const std::vector<double>& h, double lambda, double gamma) {
  return [&g, &h, lambda, gamma](const std::vector<std::size_t>& l, const std::vector<std::size_t>& r) {
    double gl = 0, hl = 0, gr = 0, hr = 0;
    for (auto i : l) gl += g[i], hl += h[i];
    for (auto i : r) gr += g[i], hr += h[i];
    const double G = gl + gr, H = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - G * G / (H + lambda)) - gamma;
  };
}

}  // namespace oracle
