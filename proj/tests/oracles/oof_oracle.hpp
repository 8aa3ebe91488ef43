#pragma once

#include <vector>

#include "c2flow/c2flow.hpp"

namespace oracle {

/// Out-of-fold matrix by the textbook loop: for every fold and base model,
/// copy the training rows by hand, fit, and score the held-out rows. Fold
/// models use seed stream (seed, fold, model), like the library.
inline Eigen::MatrixXd fold_loop_oof(const c2flow::LabeledDataset& data, const std::vector<c2flow::BaseSpec>& specs,
                                     const std::vector<int>& fold, std::uint64_t seed) {
  int k = 0;
  for (int f : fold) k = std::max(k, f + 1);
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(data.y.size()),
                                                  static_cast<Eigen::Index>(specs.size()), -1.0);
  for (int f = 0; f < k; ++f) {
    for (std::size_t m = 0; m < specs.size(); ++m) {
      c2flow::LabeledDataset train;
      train.feature_names = data.feature_names;
      std::vector<std::size_t> test_rows, train_rows;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
      train.X.resize(static_cast<Eigen::Index>(train_rows.size()), data.X.cols());
      for (std::size_t r = 0; r < train_rows.size(); ++r) {
        for (Eigen::Index c = 0; c < data.X.cols(); ++c)
          train.X(static_cast<Eigen::Index>(r), c) = data.X(static_cast<Eigen::Index>(train_rows[r]), c);
        train.y.push_back(data.y[train_rows[r]]);
        train.row_keys.push_back(data.row_keys[train_rows[r]]);
      }
      const auto model = c2flow::fit_model(specs[m].kind, specs[m].params, train,
                                           c2flow::derive_seed(seed, {static_cast<std::uint64_t>(f), m}));
      for (auto i : test_rows) {
        Eigen::MatrixXd row = data.X.row(static_cast<Eigen::Index>(i));
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
            c2flow::predict_proba(model, row, data.feature_names)[0];
      }
    }
  }
  return out;
}

}  // namespace oracle
