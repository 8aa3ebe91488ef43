#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "c2flow/boosting.hpp"
#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/forest.hpp"
#include "c2flow/logistic.hpp"
#include "c2flow/pca.hpp"

namespace c2flow {

enum class ModelKind { rf, pca_rf, gbm, gbm2, glm, lasso, stack };

/// The six base learners, in stacking column order.
inline constexpr std::array<ModelKind, 6> kBaseKinds = {ModelKind::rf,   ModelKind::pca_rf,
                                                        ModelKind::gbm,  ModelKind::gbm2,
                                                        ModelKind::glm,  ModelKind::lasso};

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::rf: return "rf";
    case ModelKind::pca_rf: return "pca_rf";
    case ModelKind::gbm: return "gbm";
    case ModelKind::gbm2: return "gbm2";
    case ModelKind::glm: return "glm";
    case ModelKind::lasso: return "lasso";
    case ModelKind::stack: return "stack";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::rf, ModelKind::pca_rf, ModelKind::gbm, ModelKind::gbm2, ModelKind::glm,
                 ModelKind::lasso, ModelKind::stack})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown model kind '" + std::string(s) + "'");
}

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatTag = "c2flow-model";

struct PcaForestParams {
  double variance_retained = 0.95;
  ForestParams forest;
};

inline void to_json(nlohmann::json& j, const PcaForestParams& p) {
  j = p.forest;
  j["variance_retained"] = p.variance_retained;
}
inline void from_json(const nlohmann::json& j, PcaForestParams& p) {
  p.forest = j.get<ForestParams>();
  p.variance_retained = j.value("variance_retained", 0.95);
  if (p.variance_retained <= 0 || p.variance_retained > 1)
    throw InvalidArgument("variance_retained must be in (0, 1]");
}

/// Any fitted base classifier with its provenance.
struct ModelArtifact {
  using Body = std::variant<RandomForest, PcaForest, BoostedModel, LogisticModel, LassoModel>;

  ModelKind kind = ModelKind::rf;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json training_meta = nlohmann::json::object();
  Body body;

  /// Scores for a matrix whose columns are already in feature_names order.
  Eigen::VectorXd predict_aligned(const Eigen::MatrixXd& X) const {
    return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(X); }, body);
  }
};

// ---------------------------------------------------------------------------
// Column alignment and prediction
// ---------------------------------------------------------------------------

/// Reorders the columns of X (named `names`) into `wanted` order. Extra
/// columns are ignored; a missing column or non-finite cell is an error.
inline Eigen::MatrixXd align_columns(const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                                     const std::vector<std::string>& wanted) {
  if (static_cast<std::size_t>(X.cols()) != names.size())
    throw InvalidArgument("matrix has " + std::to_string(X.cols()) + " columns but " +
                          std::to_string(names.size()) + " names");
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t j = 0; j < names.size(); ++j) index.emplace(names[j], static_cast<Eigen::Index>(j));
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(wanted.size()));
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    auto it = index.find(wanted[j]);
    if (it == index.end()) throw InvalidArgument("input is missing feature column '" + wanted[j] + "'");
    out.col(static_cast<Eigen::Index>(j)) = X.col(it->second);
  }
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      if (!std::isfinite(out(i, j)))
        throw InvalidArgument("non-finite value in row " + std::to_string(i) + ", column '" +
                              wanted[static_cast<std::size_t>(j)] + "'");
  return out;
}

/// Probability of the malicious class for each row of X, matching columns by name.
inline std::vector<double> predict_proba(const ModelArtifact& m, const Eigen::MatrixXd& X,
                                         const std::vector<std::string>& names) {
  const Eigen::VectorXd s = m.predict_aligned(align_columns(X, names, m.feature_names));
  std::vector<double> out(s.data(), s.data() + s.size());
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

inline std::vector<double> predict_proba(const ModelArtifact& m, const LabeledDataset& d) {
  return predict_proba(m, d.X, d.feature_names);
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOptions {
  int jobs = 1;
};

inline ModelArtifact fit_model(ModelKind kind, const nlohmann::json& params, const LabeledDataset& data,
                               std::uint64_t seed, const FitOptions& opt = {}) {
  data.validate();
  ModelArtifact m;
  m.kind = kind;
  m.seed = seed;
  m.feature_names = data.feature_names;
  const std::span<const int> y(data.y);
  switch (kind) {
    case ModelKind::rf: {
      const auto p = params.get<ForestParams>();
      m.params = p;
      m.params["mtry_resolved"] = p.resolve_mtry(static_cast<int>(data.cols()));
      m.body = fit_random_forest(data.X, y, p, seed, opt.jobs);
      break;
    }
    case ModelKind::pca_rf: {
      const auto p = params.get<PcaForestParams>();
      PcaForest pf;
      pf.pca = fit_pca(data.X, p.variance_retained);
      const Eigen::MatrixXd scores = pf.pca.transform(data.X);
      pf.forest = fit_random_forest(scores, y, p.forest, seed, opt.jobs);
      m.params = p;
      m.training_meta["components"] = pf.pca.k;
      m.body = std::move(pf);
      break;
    }
    case ModelKind::gbm:
    case ModelKind::gbm2: {
      const auto p = params.get<BoostParams>();
      auto bm = kind == ModelKind::gbm ? fit_gbm(data.X, y, p, seed) : fit_gbm2(data.X, y, p, seed);
      m.params = p;
      if (kind == ModelKind::gbm) {
        m.params.erase("lambda");
        m.params.erase("gamma");
      }
      m.training_meta["final_train_loss"] = bm.train_loss.back();
      m.body = std::move(bm);
      break;
    }
    case ModelKind::glm: {
      const auto p = params.get<GlmParams>();
      auto [lm, info] = fit_glm(data.X, y, p);
      m.params = p;
      m.training_meta["converged"] = info.converged;
      m.training_meta["iterations"] = info.iterations;
      m.training_meta["separation_ridge"] = info.separation;
      m.training_meta["max_gradient"] = info.max_gradient;
      m.body = std::move(lm);
      break;
    }
    case ModelKind::lasso: {
      const auto p = params.get<LassoParams>();
      auto lm = fit_lasso(data.X, y, p, seed);
      m.params = p;
      m.training_meta["selected_lambda"] = lm.lambda();
      nlohmann::json excluded = nlohmann::json::array();
      for (auto j : lm.excluded_features()) excluded.push_back(data.feature_names[j]);
      m.training_meta["excluded_features"] = excluded;
      m.body = std::move(lm);
      break;
    }
    case ModelKind::stack:
      throw InvalidArgument("fit_model: stacks are fitted with fit_stack");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ModelArtifact& m) {
  nlohmann::json body = std::visit([](const auto& b) { return b.to_json(); }, m.body);
  return {{"format", kModelFormatTag},
          {"version", kModelFormatVersion},
          {"kind", to_string(m.kind)},
          {"seed", m.seed},
          {"feature_names", m.feature_names},
          {"params", m.params},
          {"training_meta", m.training_meta},
          {"body", body}};
}

inline void check_model_header(const nlohmann::json& j, const std::string& origin) {
  if (!j.is_object() || j.value("format", "") != kModelFormatTag)
    throw FormatError(origin + ": not a c2flow model file");
  const int v = j.at("version").get<int>();
  if (v > kModelFormatVersion)
    throw FormatError(origin + ": model format version " + std::to_string(v) +
                      " is newer than the supported version " + std::to_string(kModelFormatVersion));
  if (v < 1) throw FormatError(origin + ": invalid model format version " + std::to_string(v));
}

inline ModelArtifact model_from_json(const nlohmann::json& j, const std::string& origin = "<json>") {
  check_model_header(j, origin);
  ModelArtifact m;
  m.kind = parse_model_kind(j.at("kind").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.params = j.at("params");
  m.training_meta = j.at("training_meta");
  const auto& b = j.at("body");
  switch (m.kind) {
    case ModelKind::rf: m.body = RandomForest::from_json(b); break;
    case ModelKind::pca_rf: m.body = PcaForest::from_json(b); break;
    case ModelKind::gbm:
    case ModelKind::gbm2: m.body = BoostedModel::from_json(b); break;
    case ModelKind::glm: m.body = LogisticModel::from_json(b); break;
    case ModelKind::lasso: m.body = LassoModel::from_json(b); break;
    case ModelKind::stack: throw FormatError(origin + ": stack model where a base model was expected");
  }
  return m;
}

inline nlohmann::json load_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline ModelArtifact load_model(const std::string& path) { return model_from_json(load_json_file(path), path); }

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Hyperparameter grids
// ---------------------------------------------------------------------------

/// Candidate settings per kind, listed simplest first (fewer trees,
/// shallower depth, stronger regularization), so the first best cell wins ties.
using HyperGrid = std::vector<nlohmann::json>;

inline HyperGrid default_grid(ModelKind kind) {
  HyperGrid g;
  switch (kind) {
    case ModelKind::rf:
      for (int trees : {100, 300})
        for (int depth : {12, kUnlimitedDepth})
          for (const char* mtry : {"sqrt", "third"})
            g.push_back({{"trees", trees}, {"mtry", mtry}, {"max_depth", depth}});
      break;
    case ModelKind::pca_rf:
      for (int trees : {100, 300})
        g.push_back({{"trees", trees}, {"mtry", "sqrt"}, {"variance_retained", 0.95}});
      break;
    case ModelKind::gbm:
    case ModelKind::gbm2:
      for (int trees : {100, 300})
        for (int depth : {3, 5})
          for (double lr : {0.05, 0.1}) {
            nlohmann::json c = {{"trees", trees}, {"max_depth", depth}, {"learning_rate", lr}};
            if (kind == ModelKind::gbm2) {
              c["lambda"] = 1.0;
              c["gamma"] = 0.0;
            }
            g.push_back(c);
          }
      break;
    case ModelKind::glm: g.push_back(nlohmann::json::object()); break;
    case ModelKind::lasso: g.push_back({{"n_lambda", 20}}); break;
    case ModelKind::stack: throw InvalidArgument("no grid for stack");
  }
  return g;
}

}  // namespace c2flow
