#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "c2flow/common.hpp"

namespace c2flow {

/// Area under the ROC curve as the Mann-Whitney statistic
/// P(s+ > s-) + P(s+ = s-)/2, computed from mid-ranks.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share their mean
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum_pos += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidArgument("auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

/// True-positive rate with score >= threshold flagged positive.
inline double sensitivity(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size())
    throw InvalidArgument("sensitivity: scores and labels differ in length");
  std::size_t tp = 0, pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++pos;
    if (scores[i] >= threshold) ++tp;
  }
  if (pos == 0) throw InvalidArgument("sensitivity: no positive labels");
  return static_cast<double>(tp) / static_cast<double>(pos);
}

}  // namespace c2flow
