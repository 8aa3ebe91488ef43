#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <concepts>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/ensemble.hpp"
#include "c2flow/metrics.hpp"
#include "c2flow/model.hpp"

namespace c2flow {

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

struct BootstrapMetrics {
  std::vector<double> auc;
  std::vector<double> sensitivity;
};

/// Row indices for resample b, given the positive and negative row indices.
using Resampler = std::function<std::vector<std::size_t>(std::size_t b, const std::vector<std::size_t>& pos,
                                                         const std::vector<std::size_t>& neg)>;

/// Class-stratified draw with replacement: |pos| positives and |neg| negatives.
inline Resampler stratified_resampler(std::uint64_t seed) {
  return [seed](std::size_t b, const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg) {
    auto rng = make_rng(seed, {b});
    std::vector<std::size_t> out;
    out.reserve(pos.size() + neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) out.push_back(pos[uniform_index(rng, pos.size())]);
    for (std::size_t i = 0; i < neg.size(); ++i) out.push_back(neg[uniform_index(rng, neg.size())]);
    return out;
  };
}

struct BootstrapOptions {
  double threshold = 0.5;
  int jobs = 1;
  Resampler resampler;  // defaults to stratified_resampler(seed)
};

inline BootstrapMetrics bootstrap_metrics(std::span<const double> scores, std::span<const int> labels,
                                          std::size_t B, std::uint64_t seed, const BootstrapOptions& opt = {}) {
  if (scores.size() != labels.size()) throw InvalidArgument("bootstrap: scores and labels differ in length");
  if (B < 1) throw InvalidArgument("bootstrap: need at least one resample");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw InvalidArgument("bootstrap: both classes must be present");

  const Resampler draw = opt.resampler ? opt.resampler : stratified_resampler(seed);
  BootstrapMetrics out{std::vector<double>(B), std::vector<double>(B)};
  parallel_for(B, opt.jobs, [&](std::size_t b) {
    const auto idx = draw(b, pos, neg);
    std::vector<double> s(idx.size());
    std::vector<int> y(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s[i] = scores[idx[i]];
      y[i] = labels[idx[i]];
    }
    out.auc[b] = auc(s, y);
    out.sensitivity[b] = sensitivity(s, y, opt.threshold);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::string model_kind;
  double point_auc = 0;
  double point_sensitivity = 0;
  double threshold = 0.5;
  std::vector<double> bootstrap_auc;
  std::vector<double> bootstrap_sensitivity;
  std::size_t resamples = 0;
  std::uint64_t seed = 0;

  double mean_bootstrap_auc() const { return mean_of(bootstrap_auc); }
  double mean_bootstrap_sensitivity() const { return mean_of(bootstrap_sensitivity); }
};

inline EvaluationReport evaluate_scores(std::string model_kind, std::span<const double> scores,
                                        std::span<const int> labels, std::size_t B, std::uint64_t seed,
                                        const BootstrapOptions& opt = {}) {
  EvaluationReport r;
  r.model_kind = std::move(model_kind);
  r.point_auc = auc(scores, labels);
  r.point_sensitivity = sensitivity(scores, labels, opt.threshold);
  r.threshold = opt.threshold;
  auto bm = bootstrap_metrics(scores, labels, B, seed, opt);
  r.bootstrap_auc = std::move(bm.auc);
  r.bootstrap_sensitivity = std::move(bm.sensitivity);
  r.resamples = B;
  r.seed = seed;
  return r;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  return {{"model_kind", r.model_kind},
          {"point_auc", r.point_auc},
          {"point_sensitivity", r.point_sensitivity},
          {"threshold", r.threshold},
          {"resamples", r.resamples},
          {"seed", r.seed},
          {"mean_bootstrap_auc", r.mean_bootstrap_auc()},
          {"mean_bootstrap_sensitivity", r.mean_bootstrap_sensitivity()},
          {"bootstrap_auc", r.bootstrap_auc},
          {"bootstrap_sensitivity", r.bootstrap_sensitivity}};
}

/// Long-format bootstrap table: model,resample,auc,sensitivity.
inline void write_bootstrap_table(std::ostream& out, const std::vector<EvaluationReport>& reports) {
  out << "model,resample,auc,sensitivity\n";
  for (const auto& r : reports)
    for (std::size_t b = 0; b < r.bootstrap_auc.size(); ++b)
      out << r.model_kind << ',' << b << ',' << format_double(r.bootstrap_auc[b]) << ','
          << format_double(r.bootstrap_sensitivity[b]) << '\n';
}

// ---------------------------------------------------------------------------
// Cross-validated tuning
// ---------------------------------------------------------------------------

struct CvResult {
  std::size_t chosen = 0;
  nlohmann::json chosen_params;
  HyperGrid grid;
  std::vector<double> mean_auc;              // per cell
  std::vector<std::vector<double>> fold_auc;  // per cell, per fold
};

/// Picks the grid cell with the highest mean fold AUC. The first of equal
/// cells wins, so grids should be listed simplest first. Every fold model
/// for fold f uses seed stream (seed, f) regardless of cell.
inline CvResult cv_tune(const LabeledDataset& data, ModelKind kind, const HyperGrid& grid, int k,
                        std::uint64_t seed, int jobs = 1) {
  data.validate();
  if (grid.empty()) throw InvalidArgument("cv_tune: empty grid");
  const auto pos = data.positives();
  if (pos < static_cast<std::size_t>(k) || data.rows() - pos < static_cast<std::size_t>(k))
    throw InvalidArgument("cv_tune: each class needs at least " + std::to_string(k) + " rows for " +
                          std::to_string(k) + "-fold cross-validation");
  const auto fold = stratified_folds(data.y, k, seed);

  CvResult res;
  res.grid = grid;
  res.fold_auc.assign(grid.size(), std::vector<double>(static_cast<std::size_t>(k)));
  const std::size_t K = static_cast<std::size_t>(k);
  parallel_for(grid.size() * K, jobs, [&](std::size_t job) {
    const std::size_t c = job / K, f = job % K;
    const auto train = data.subset(rows_where(fold, static_cast<int>(f), false));
    const auto test = data.subset(rows_where(fold, static_cast<int>(f), true));
    const auto m = fit_model(kind, grid[c], train, derive_seed(seed, {f}));
    res.fold_auc[c][f] = auc(predict_proba(m, test), test.y);
  });
  for (const auto& fa : res.fold_auc) res.mean_auc.push_back(mean_of(fa));
  for (std::size_t c = 1; c < grid.size(); ++c)
    if (res.mean_auc[c] > res.mean_auc[res.chosen]) res.chosen = c;
  res.chosen_params = grid[res.chosen];
  return res;
}

inline nlohmann::json to_json(const CvResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t c = 0; c < r.grid.size(); ++c)
    cells.push_back({{"params", r.grid[c]}, {"mean_auc", r.mean_auc[c]}, {"fold_auc", r.fold_auc[c]}});
  return {{"chosen", r.chosen}, {"chosen_params", r.chosen_params}, {"cells", cells}};
}

/// Flat table: model,cell,params,mean_auc.
inline void write_cv_table(std::ostream& out, const std::vector<std::pair<std::string, CvResult>>& results) {
  out << "model,cell,params,mean_auc,chosen\n";
  for (const auto& [kind, r] : results)
    for (std::size_t c = 0; c < r.grid.size(); ++c) {
      auto p = r.grid[c].dump();
      for (char& ch : p)
        if (ch == ',') ch = ';';
      out << kind << ',' << c << ',' << p << ',' << format_double(r.mean_auc[c]) << ','
          << (c == r.chosen ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Permutation importance
// ---------------------------------------------------------------------------

struct ImportanceReport {
  std::vector<std::string> feature_names;
  std::vector<double> raw_importance;
  std::vector<double> percentile_importance;

  /// Feature indices by descending raw importance; ties keep column order.
  std::vector<std::size_t> ranking() const {
    std::vector<std::size_t> idx(raw_importance.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return raw_importance[a] > raw_importance[b]; });
    return idx;
  }

  std::vector<std::string> top(std::size_t n) const {
    std::vector<std::string> out;
    for (auto j : ranking()) {
      if (out.size() == n) break;
      out.push_back(feature_names[j]);
    }
    return out;
  }
};

/// 100 * rank / d with ascending ranks 1..d; tied values share the highest rank.
inline std::vector<double> percentile_scale(const std::vector<double>& raw) {
  const std::size_t d = raw.size();
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d;) {
    std::size_t j = i;
    while (j < d && raw[idx[j]] == raw[idx[i]]) ++j;
    for (std::size_t t = i; t < j; ++t)
      out[idx[t]] = 100.0 * static_cast<double>(j) / static_cast<double>(d);
    i = j;
  }
  return out;
}

/// Mean AUC drop when one column is shuffled. `predict` maps a matrix with
/// data.feature_names columns to probabilities. Column j, repeat r is
/// shuffled with seed stream (seed, j, r).
template <class Predict>
  requires std::invocable<Predict&, const Eigen::MatrixXd&>
ImportanceReport permutation_importance(Predict&& predict, const LabeledDataset& data, int repeats,
                                        std::uint64_t seed, int jobs = 1) {
  data.validate();
  if (repeats < 1) throw InvalidArgument("permutation_importance: repeats must be >= 1");
  const auto baseline_scores = predict(data.X);
  const double baseline = auc(baseline_scores, data.y);
  const std::size_t d = data.cols();
  ImportanceReport rep;
  rep.feature_names = data.feature_names;
  rep.raw_importance.assign(d, 0.0);
  parallel_for(d, jobs, [&](std::size_t j) {
    Eigen::MatrixXd Xp = data.X;
    const auto col = static_cast<Eigen::Index>(j);
    double drop = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(data.X.rows()));
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      auto rng = make_rng(seed, {j, static_cast<std::uint64_t>(r)});
      shuffle(perm, rng);
      for (Eigen::Index i = 0; i < Xp.rows(); ++i) Xp(i, col) = data.X(perm[static_cast<std::size_t>(i)], col);
      drop += baseline - auc(predict(Xp), data.y);
    }
    rep.raw_importance[j] = drop / repeats;
  });
  rep.percentile_importance = percentile_scale(rep.raw_importance);
  return rep;
}

inline ImportanceReport permutation_importance(const ModelArtifact& m, const LabeledDataset& data, int repeats,
                                               std::uint64_t seed, int jobs = 1) {
  return permutation_importance(
      [&](const Eigen::MatrixXd& X) { return predict_proba(m, X, data.feature_names); }, data, repeats, seed,
      jobs);
}

inline ImportanceReport permutation_importance(const StackModel& s, const LabeledDataset& data, int repeats,
                                               std::uint64_t seed, int jobs = 1) {
  return permutation_importance(
      [&](const Eigen::MatrixXd& X) { return predict_stack(s, X, data.feature_names); }, data, repeats, seed,
      jobs);
}

inline nlohmann::json to_json(const ImportanceReport& r) {
  nlohmann::json feats = nlohmann::json::array();
  for (auto j : r.ranking())
    feats.push_back({{"feature", r.feature_names[j]},
                     {"raw", r.raw_importance[j]},
                     {"percentile", r.percentile_importance[j]},
                     {"distributional", is_distributional_feature(r.feature_names[j])}});
  return {{"features", feats}};
}

/// Flat table in descending importance: model,rank,feature,raw,percentile.
inline void write_importance_table(std::ostream& out, const std::string& model, const ImportanceReport& r,
                                   bool header = true) {
  if (header) out << "model,rank,feature,raw,percentile\n";
  std::size_t rank = 1;
  for (auto j : r.ranking())
    out << model << ',' << rank++ << ',' << r.feature_names[j] << ',' << format_double(r.raw_importance[j])
        << ',' << format_double(r.percentile_importance[j]) << '\n';
}

}  // namespace c2flow
