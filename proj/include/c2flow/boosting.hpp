#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/tree.hpp"

namespace c2flow {

struct BoostParams {
  int trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_leaf = 1;
  double lambda = 1.0;  // second-order variant only
  double gamma = 0.0;   // second-order variant only
};

inline void to_json(nlohmann::json& j, const BoostParams& p) {
  j = {{"trees", p.trees},       {"learning_rate", p.learning_rate}, {"max_depth", p.max_depth},
       {"min_leaf", p.min_leaf}, {"lambda", p.lambda},               {"gamma", p.gamma}};
}

inline void from_json(const nlohmann::json& j, BoostParams& p) {
  p = BoostParams{};
  if (j.contains("trees")) j.at("trees").get_to(p.trees);
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(p.learning_rate);
  if (j.contains("max_depth")) j.at("max_depth").get_to(p.max_depth);
  if (j.contains("min_leaf")) j.at("min_leaf").get_to(p.min_leaf);
  if (j.contains("lambda")) j.at("lambda").get_to(p.lambda);
  if (j.contains("gamma")) j.at("gamma").get_to(p.gamma);
  if (p.trees < 0) throw InvalidArgument("boosting rounds must be >= 0");
  if (p.learning_rate <= 0) throw InvalidArgument("learning_rate must be > 0");
  if (p.lambda < 0) throw InvalidArgument("lambda must be >= 0");
}

/// Additive log-odds model: F(x) = base + rate * sum_t tree_t(x), p = sigmoid(F).
struct BoostedModel {
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::vector<DecisionTree> trees;
  std::vector<double> train_loss;  // mean log loss before round 1, after each round

  Eigen::VectorXd decision_function(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), base_score);
    for (const auto& t : trees) f += learning_rate * t.predict(X);
    return f;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return decision_function(X).unaryExpr([](double z) { return sigmoid(z); });
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"base_score", base_score}, {"learning_rate", learning_rate}, {"trees", arr}};
  }

  static BoostedModel from_json(const nlohmann::json& j) {
    BoostedModel m;
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& t : j.at("trees")) m.trees.push_back(DecisionTree::from_json(t));
    return m;
  }
};

inline double mean_log_loss(std::span<const int> y, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = f(static_cast<Eigen::Index>(i));
    // log(1 + e^z) - y z, evaluated without overflow
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += softplus - y[i] * z;
  }
  return s / static_cast<double>(y.size());
}

namespace detail {

inline double base_log_odds(std::span<const int> y) {
  double p = 0;
  for (int v : y) p += v;
  p /= static_cast<double>(y.size());
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return logit(p);
}

}  // namespace detail

/// First-order gradient boosting: each round fits a least-squares tree to the
/// residuals y - p and steps along it.
inline BoostedModel fit_gbm(const Eigen::MatrixXd& X, std::span<const int> y, const BoostParams& p,
                            std::uint64_t seed) {
  BoostedModel m;
  m.base_score = detail::base_log_odds(y);
  m.learning_rate = p.learning_rate;
  TreeParams tp;
  tp.max_depth = p.max_depth;
  tp.min_leaf = p.min_leaf;

  const auto n = static_cast<std::size_t>(X.rows());
  Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), m.base_score);
  std::vector<double> resid(n);
  m.train_loss.push_back(mean_log_loss(y, f));
  for (int t = 0; t < p.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - sigmoid(f(static_cast<Eigen::Index>(i)));
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    m.trees.push_back(fit_regression_tree(X, resid, all_rows(n), tp, rng));
    f += p.learning_rate * m.trees.back().predict(X);
    m.train_loss.push_back(mean_log_loss(y, f));
  }
  return m;
}

/// Second-order regularized boosting: splits and leaves use the logistic
/// gradient g = p - y and hessian h = p(1 - p).
inline BoostedModel fit_gbm2(const Eigen::MatrixXd& X, std::span<const int> y, const BoostParams& p,
                             std::uint64_t seed) {
  BoostedModel m;
  m.base_score = detail::base_log_odds(y);
  m.learning_rate = p.learning_rate;
  TreeParams tp;
  tp.max_depth = p.max_depth;
  tp.min_leaf = p.min_leaf;
  tp.lambda = p.lambda;
  tp.gamma = p.gamma;

  const auto n = static_cast<std::size_t>(X.rows());
  Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), m.base_score);
  std::vector<double> g(n), h(n);
  m.train_loss.push_back(mean_log_loss(y, f));
  for (int t = 0; t < p.trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = sigmoid(f(static_cast<Eigen::Index>(i)));
      g[i] = pi - y[i];
      h[i] = pi * (1.0 - pi);
    }
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    m.trees.push_back(fit_newton_tree(X, g, h, all_rows(n), tp, rng));
    f += p.learning_rate * m.trees.back().predict(X);
    m.train_loss.push_back(mean_log_loss(y, f));
  }
  return m;
}

}  // namespace c2flow
