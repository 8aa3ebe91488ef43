#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Mann-Whitney by enumerating every positive/negative pair.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  std::size_t pos = 0, neg = 0;
  for (int v : y) (v == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw std::invalid_argument("one class");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// True positives over positives, counted from the confusion matrix.
inline double confusion_sensitivity(const std::vector<double>& s, const std::vector<int>& y, double t) {
  int tp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    if (s[i] >= t) ++tp;
    else ++fn;
  }
  return static_cast<double>(tp) / (tp + fn);
}

}  // namespace oracle
