#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/metrics.hpp"
#include "c2flow/model.hpp"

namespace c2flow {

/// A base learner and the hyperparameters it is fitted with.
struct BaseSpec {
  ModelKind kind = ModelKind::rf;
  nlohmann::json params = nlohmann::json::object();
};

/// Meta-feature names: the base kinds, suffixed with their position when a
/// kind appears more than once.
inline std::vector<std::string> meta_feature_names(const std::vector<BaseSpec>& specs) {
  std::vector<std::string> names;
  std::multiset<ModelKind> seen;
  for (const auto& s : specs) seen.insert(s.kind);
  for (std::size_t m = 0; m < specs.size(); ++m) {
    auto n = to_string(specs[m].kind);
    if (seen.count(specs[m].kind) > 1) n += "#" + std::to_string(m);
    names.push_back(n);
  }
  return names;
}

/// Default fold-model fitter: fit_model on the training part, scores on the held-out part.
struct ArtifactFitter {
  int jobs = 1;
  std::vector<double> operator()(const BaseSpec& spec, const LabeledDataset& train,
                                 const LabeledDataset& test, std::uint64_t seed) const {
    return predict_proba(fit_model(spec.kind, spec.params, train, seed, {jobs}), test);
  }
};

/// Out-of-fold base predictions. Entry (i, m) comes from base m trained on every
/// fold except fold[i]. Fold models use seed stream (seed, fold, m).
template <class Fitter>
Eigen::MatrixXd oof_matrix(const LabeledDataset& data, const std::vector<BaseSpec>& specs,
                           const std::vector<int>& fold, std::uint64_t seed, Fitter&& fit, int jobs = 1) {
  if (fold.size() != data.rows()) throw InvalidArgument("oof_matrix: fold ids do not match rows");
  const int k = *std::max_element(fold.begin(), fold.end()) + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(specs.size()));
  const std::size_t jobs_total = static_cast<std::size_t>(k) * specs.size();
  parallel_for(jobs_total, jobs, [&](std::size_t job) {
    const int f = static_cast<int>(job / specs.size());
    const std::size_t m = job % specs.size();
    const auto train_rows = rows_where(fold, f, false);
    const auto test_rows = rows_where(fold, f, true);
    if (test_rows.empty()) return;
    const auto train = data.subset(train_rows);
    const auto test = data.subset(test_rows);
    const auto scores = fit(specs[m], train, test, derive_seed(seed, {static_cast<std::uint64_t>(f), m}));
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      out(static_cast<Eigen::Index>(test_rows[i]), static_cast<Eigen::Index>(m)) = scores[i];
  });
  return out;
}

/// Stratified k-fold variant; raises when a class has fewer than two rows.
inline Eigen::MatrixXd oof_matrix(const LabeledDataset& data, const std::vector<BaseSpec>& specs, int k,
                                  std::uint64_t seed, int jobs = 1) {
  const auto fold = stratified_folds(data.y, k, seed);
  return oof_matrix(data, specs, fold, seed, ArtifactFitter{1}, jobs);
}

struct StackModel {
  std::vector<BaseSpec> base_specs;
  std::vector<ModelArtifact> base_models;
  ModelArtifact meta;  // glm over the base probabilities
  int folds = 10;
  std::uint64_t seed = 0;
  bool logit_inputs = false;
  std::vector<std::string> feature_names;
  nlohmann::json training_meta = nlohmann::json::object();
};

namespace detail {

inline double meta_input(double p, bool logit_inputs) {
  if (!logit_inputs) return p;
  return logit(std::clamp(p, 1e-6, 1.0 - 1e-6));
}

}  // namespace detail

struct StackOptions {
  int jobs = 1;
  bool logit_inputs = false;
};

/// Meta GLM on out-of-fold base predictions; bases are then refit on all rows.
inline StackModel fit_stack(const LabeledDataset& data, const std::vector<BaseSpec>& specs, int k,
                            std::uint64_t seed, const StackOptions& opt = {}) {
  data.validate();
  if (specs.empty()) throw InvalidArgument("fit_stack: no base models");
  StackModel s;
  s.base_specs = specs;
  s.folds = k;
  s.seed = seed;
  s.logit_inputs = opt.logit_inputs;
  s.feature_names = data.feature_names;

  const auto fold = stratified_folds(data.y, k, seed);
  const Eigen::MatrixXd oof = oof_matrix(data, specs, fold, seed, ArtifactFitter{1}, opt.jobs);

  LabeledDataset meta_data;
  meta_data.X = oof.unaryExpr([&](double p) { return detail::meta_input(p, opt.logit_inputs); });
  meta_data.y = data.y;
  meta_data.row_keys = data.row_keys;
  meta_data.feature_names = meta_feature_names(specs);
  s.meta = fit_model(ModelKind::glm, nlohmann::json::object(), meta_data, seed);

  nlohmann::json oof_auc = nlohmann::json::object();
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const Eigen::VectorXd col = oof.col(static_cast<Eigen::Index>(m));
    oof_auc[meta_data.feature_names[m]] =
        auc(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), data.y);
  }
  s.training_meta["oof_auc"] = oof_auc;

  s.base_models.resize(specs.size());
  for (std::size_t m = 0; m < specs.size(); ++m)
    s.base_models[m] = fit_model(specs[m].kind, specs[m].params, data, derive_seed(seed, {0xFFFFu, m}),
                                 {opt.jobs});
  return s;
}

/// Base predictions for X, one column per base model.
inline Eigen::MatrixXd stack_meta_inputs(const StackModel& s, const Eigen::MatrixXd& X,
                                         const std::vector<std::string>& names) {
  Eigen::MatrixXd Z(X.rows(), static_cast<Eigen::Index>(s.base_models.size()));
  for (std::size_t m = 0; m < s.base_models.size(); ++m) {
    const auto p = predict_proba(s.base_models[m], X, names);
    for (std::size_t i = 0; i < p.size(); ++i)
      Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = detail::meta_input(p[i], s.logit_inputs);
  }
  return Z;
}

inline std::vector<double> predict_stack(const StackModel& s, const Eigen::MatrixXd& X,
                                         const std::vector<std::string>& names) {
  const Eigen::VectorXd p = s.meta.predict_aligned(stack_meta_inputs(s, X, names));
  std::vector<double> out(p.data(), p.data() + p.size());
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

inline std::vector<double> predict_stack(const StackModel& s, const LabeledDataset& d) {
  return predict_stack(s, d.X, d.feature_names);
}

inline nlohmann::json to_json(const StackModel& s) {
  nlohmann::json specs = nlohmann::json::array(), bases = nlohmann::json::array();
  for (const auto& b : s.base_specs) specs.push_back({{"kind", to_string(b.kind)}, {"params", b.params}});
  for (const auto& m : s.base_models) bases.push_back(to_json(m));
  return {{"format", kModelFormatTag},
          {"version", kModelFormatVersion},
          {"kind", "stack"},
          {"seed", s.seed},
          {"folds", s.folds},
          {"logit_inputs", s.logit_inputs},
          {"feature_names", s.feature_names},
          {"training_meta", s.training_meta},
          {"base_specs", specs},
          {"base_models", bases},
          {"meta", to_json(s.meta)}};
}

inline StackModel stack_from_json(const nlohmann::json& j, const std::string& origin = "<json>") {
  check_model_header(j, origin);
  if (j.at("kind").get<std::string>() != "stack") throw FormatError(origin + ": not a stack model");
  StackModel s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.folds = j.at("folds").get<int>();
  s.logit_inputs = j.at("logit_inputs").get<bool>();
  s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  s.training_meta = j.at("training_meta");
  for (const auto& b : j.at("base_specs"))
    s.base_specs.push_back({parse_model_kind(b.at("kind").get<std::string>()), b.at("params")});
  for (const auto& b : j.at("base_models")) s.base_models.push_back(model_from_json(b, origin));
  s.meta = model_from_json(j.at("meta"), origin);
  if (s.base_models.size() != s.base_specs.size() ||
      s.meta.feature_names.size() != s.base_models.size())
    throw FormatError(origin + ": stack base models, specs and meta inputs disagree");
  return s;
}

inline StackModel load_stack(const std::string& path) { return stack_from_json(load_json_file(path), path); }

/// Default base specs: each kind with its first grid cell.
inline std::vector<BaseSpec> default_base_specs() {
  std::vector<BaseSpec> out;
  for (auto k : kBaseKinds) out.push_back({k, default_grid(k).front()});
  return out;
}

}  // namespace c2flow
