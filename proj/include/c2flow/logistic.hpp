#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/metrics.hpp"
#include "c2flow/pca.hpp"

namespace c2flow {

/// Logistic model over standardized features:
/// p = sigmoid(intercept + sum_j coef_j * (x_j - mean_j) / scale_j).
struct LogisticModel {
  Standardizer standardizer;
  double intercept = 0.0;
  Eigen::VectorXd coef;

  Eigen::VectorXd decision_function(const Eigen::MatrixXd& X) const {
    return (standardizer.apply(X) * coef).array() + intercept;
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return decision_function(X).unaryExpr([](double z) { return sigmoid(z); });
  }

  /// Coefficients on the raw feature scale: (intercept, slopes).
  std::pair<double, Eigen::VectorXd> raw_coefficients() const {
    Eigen::VectorXd b = coef.array() / standardizer.scales.array();
    return {intercept - b.dot(standardizer.means), b};
  }

  nlohmann::json to_json() const {
    return {{"standardizer", standardizer.to_json()},
            {"intercept", intercept},
            {"coef", std::vector<double>(coef.data(), coef.data() + coef.size())}};
  }
  static LogisticModel from_json(const nlohmann::json& j) {
    LogisticModel m;
    m.standardizer = Standardizer::from_json(j.at("standardizer"));
    m.intercept = j.at("intercept").get<double>();
    auto c = j.at("coef").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(c.size()) != m.standardizer.means.size())
      throw FormatError("logistic coefficients and standardizer disagree in length");
    m.coef = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    return m;
  }
};

/// Mean negative log-likelihood of raw-scale coefficients.
inline double logistic_loss(const Eigen::MatrixXd& X, std::span<const int> y, double b0,
                            const Eigen::VectorXd& b) {
  const Eigen::VectorXd eta = (X * b).array() + b0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double z = eta(i);
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += softplus - y[static_cast<std::size_t>(i)] * z;
  }
  return s / static_cast<double>(eta.size());
}

/// Gradient of logistic_loss with respect to (b0, b).
inline Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, std::span<const int> y, double b0,
                                         const Eigen::VectorXd& b) {
  const Eigen::VectorXd eta = (X * b).array() + b0;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = sigmoid(eta(i)) - y[static_cast<std::size_t>(i)];
  Eigen::VectorXd g(X.cols() + 1);
  const auto n = static_cast<double>(eta.size());
  g(0) = resid.sum() / n;
  g.tail(X.cols()) = X.transpose() * resid / n;
  return g;
}

// ---------------------------------------------------------------------------
// Unpenalized logistic regression (damped Newton)
// ---------------------------------------------------------------------------

struct GlmParams {
  int max_iter = 100;
  double tol = 1e-8;
};

inline void to_json(nlohmann::json& j, const GlmParams& p) { j = {{"max_iter", p.max_iter}, {"tol", p.tol}}; }
inline void from_json(const nlohmann::json& j, GlmParams& p) {
  p = GlmParams{};
  if (j.contains("max_iter")) j.at("max_iter").get_to(p.max_iter);
  if (j.contains("tol")) j.at("tol").get_to(p.tol);
}

struct GlmFitInfo {
  bool converged = false;
  int iterations = 0;
  bool separation = false;  // ridge fallback engaged
  double ridge = 0.0;
  double max_gradient = 0.0;
};

namespace detail {

struct NewtonResult {
  double b0 = 0;
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  double max_gradient = 0;
};

/// Minimizes mean NLL + ridge/2 |beta|^2 over standardized Z.
inline NewtonResult newton_logistic(const Eigen::MatrixXd& Z, std::span<const int> y, double ridge,
                                    int max_iter, double tol) {
  const auto n = Z.rows();
  const auto d = Z.cols();
  Eigen::MatrixXd A(n, d + 1);
  A.col(0).setOnes();
  A.rightCols(d) = Z;

  double ybar = 0;
  for (int v : y) ybar += v;
  ybar /= static_cast<double>(n);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  theta(0) = logit(std::clamp(ybar, 1e-6, 1 - 1e-6));

  auto objective = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd eta = A * th;
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = eta(i);
      s += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[static_cast<std::size_t>(i)] * z;
    }
    return s / static_cast<double>(n) + 0.5 * ridge * th.tail(d).squaredNorm();
  };

  NewtonResult r;
  double obj = objective(theta);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = A * theta;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = p(i) * (1 - p(i));
    }
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid(i) = p(i) - y[static_cast<std::size_t>(i)];
    Eigen::VectorXd grad = A.transpose() * resid / static_cast<double>(n);
    grad.tail(d) += ridge * theta.tail(d);
    r.max_gradient = grad.cwiseAbs().maxCoeff();
    r.iterations = it;
    if (r.max_gradient < tol) {
      r.converged = true;
      break;
    }
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A / static_cast<double>(n);
    H.diagonal().tail(d).array() += ridge;
    H.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = H.ldlt().solve(-grad);
    if (!step.allFinite()) break;

    double t = 1.0;
    Eigen::VectorXd cand = theta + step;
    double cand_obj = objective(cand);
    if (r.max_gradient > 1e-5) {
      const double slope = grad.dot(step);
      while (!(cand_obj <= obj + 1e-4 * t * slope) && t > 1e-10) {
        t *= 0.5;
        cand = theta + t * step;
        cand_obj = objective(cand);
      }
    }
    theta = cand;
    obj = cand_obj;
    r.iterations = it + 1;
  }
  r.b0 = theta(0);
  r.beta = theta.tail(d);
  return r;
}

inline bool linearly_separated(const Eigen::MatrixXd& Z, std::span<const int> y, double b0,
                               const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = (Z * beta).array() + b0;
  double min_pos = INFINITY, max_neg = -INFINITY;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (y[static_cast<std::size_t>(i)] == 1)
      min_pos = std::min(min_pos, eta(i));
    else
      max_neg = std::max(max_neg, eta(i));
  }
  return min_pos > max_neg;
}

}  // namespace detail

inline constexpr double kSeparationRidge = 1e-6;

/// Maximum-likelihood logistic regression. When the classes are perfectly
/// separable the fit is repeated with a 1e-6 ridge and flagged.
inline std::pair<LogisticModel, GlmFitInfo> fit_glm(const Eigen::MatrixXd& X, std::span<const int> y,
                                                    const GlmParams& p = {}) {
  LogisticModel m;
  m.standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = m.standardizer.apply(X);
  auto r = detail::newton_logistic(Z, y, 0.0, p.max_iter, p.tol);
  GlmFitInfo info;
  if (!r.converged || !r.beta.allFinite() || detail::linearly_separated(Z, y, r.b0, r.beta)) {
    r = detail::newton_logistic(Z, y, kSeparationRidge, std::max(p.max_iter, 200), p.tol);
    info.separation = true;
    info.ridge = kSeparationRidge;
  }
  info.converged = r.converged;
  info.iterations = r.iterations;
  info.max_gradient = r.max_gradient;
  m.intercept = r.b0;
  m.coef = r.beta;
  return {m, info};
}

// ---------------------------------------------------------------------------
// L1-penalized logistic regression (coordinate descent)
// ---------------------------------------------------------------------------

struct LassoParams {
  int n_lambda = 20;
  double lambda_min_ratio = 0.0;  // 0 picks 1e-3 (n > d) or 1e-2 (n <= d)
  int folds = 10;
  double tol = 1e-9;
  int max_outer = 100;
  int max_sweeps = 10000;
  std::vector<double> lambdas;  // explicit path; overrides n_lambda when non-empty
};

inline void to_json(nlohmann::json& j, const LassoParams& p) {
  j = {{"n_lambda", p.n_lambda}, {"lambda_min_ratio", p.lambda_min_ratio}, {"folds", p.folds},
       {"tol", p.tol}, {"lambdas", p.lambdas}};
}
inline void from_json(const nlohmann::json& j, LassoParams& p) {
  p = LassoParams{};
  if (j.contains("n_lambda")) j.at("n_lambda").get_to(p.n_lambda);
  if (j.contains("lambda_min_ratio")) j.at("lambda_min_ratio").get_to(p.lambda_min_ratio);
  if (j.contains("folds")) j.at("folds").get_to(p.folds);
  if (j.contains("tol")) j.at("tol").get_to(p.tol);
  if (j.contains("lambdas")) j.at("lambdas").get_to(p.lambdas);
  if (p.n_lambda < 1) throw InvalidArgument("n_lambda must be >= 1");
}

struct LassoModel {
  LogisticModel model;
  std::vector<double> lambdas;
  std::vector<double> cv_auc;  // mean held-out AUC per lambda (empty without CV)
  std::size_t selected = 0;

  double lambda() const { return lambdas[selected]; }

  std::vector<std::size_t> excluded_features() const {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < model.coef.size(); ++j)
      if (model.coef(j) == 0.0) out.push_back(static_cast<std::size_t>(j));
    return out;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const { return model.predict(X); }

  nlohmann::json to_json() const {
    return {{"model", model.to_json()}, {"lambdas", lambdas}, {"cv_auc", cv_auc}, {"selected", selected}};
  }
  static LassoModel from_json(const nlohmann::json& j) {
    LassoModel m;
    m.model = LogisticModel::from_json(j.at("model"));
    j.at("lambdas").get_to(m.lambdas);
    j.at("cv_auc").get_to(m.cv_auc);
    j.at("selected").get_to(m.selected);
    if (m.selected >= m.lambdas.size()) throw FormatError("lasso selected index out of range");
    return m;
  }
};

/// Smallest penalty at which every slope is zero, for standardized Z.
inline double lasso_lambda_max(const Eigen::MatrixXd& Z, std::span<const int> y) {
  double ybar = 0;
  for (int v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  Eigen::VectorXd r(Z.rows());
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = y[static_cast<std::size_t>(i)] - ybar;
  return (Z.transpose() * r).cwiseAbs().maxCoeff() / static_cast<double>(Z.rows());
}

namespace detail {

inline double soft_threshold(double u, double lam) {
  if (u > lam) return u - lam;
  if (u < -lam) return u + lam;
  return 0.0;
}

struct LassoState {
  double b0 = 0;
  Eigen::VectorXd beta;
};

inline double lasso_objective(const Eigen::MatrixXd& Z, std::span<const int> y, const LassoState& s,
                              double lambda) {
  const Eigen::VectorXd eta = (Z * s.beta).array() + s.b0;
  double v = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double z = eta(i);
    v += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y[static_cast<std::size_t>(i)] * z;
  }
  return v / static_cast<double>(eta.size()) + lambda * s.beta.lpNorm<1>();
}

/// Proximal Newton: quadratic approximation per outer step, cyclic
/// coordinate descent inside, backtracking if the penalized objective rises.
inline void lasso_solve(const Eigen::MatrixXd& Z, std::span<const int> y, double lambda, LassoState& s,
                        const LassoParams& p) {
  const auto n = Z.rows();
  const auto d = Z.cols();
  const double nn = static_cast<double>(n);
  double obj = lasso_objective(Z, y, s, lambda);
  for (int outer = 0; outer < p.max_outer; ++outer) {
    const Eigen::VectorXd eta = (Z * s.beta).array() + s.b0;
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      w(i) = std::max(pi * (1 - pi), 1e-5);
      r(i) = (y[static_cast<std::size_t>(i)] - pi) / w(i);
    }
    Eigen::VectorXd v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = (w.array() * Z.col(j).array().square()).sum() / nn;
    const double wsum = w.sum();

    const LassoState start = s;
    for (int sweep = 0; sweep < p.max_sweeps; ++sweep) {
      double max_change = 0;
      const double db0 = w.dot(r) / wsum;
      s.b0 += db0;
      r.array() -= db0;
      max_change = std::max(max_change, std::abs(db0));
      for (Eigen::Index j = 0; j < d; ++j) {
        if (v(j) <= 0) continue;
        const double old = s.beta(j);
        const double u = (w.array() * Z.col(j).array() * r.array()).sum() / nn + v(j) * old;
        const double nw = soft_threshold(u, lambda) / v(j);
        if (nw != old) {
          r -= Z.col(j) * (nw - old);
          s.beta(j) = nw;
          max_change = std::max(max_change, std::abs(nw - old) * std::sqrt(v(j)));
        }
      }
      if (max_change < p.tol) break;
    }

    double new_obj = lasso_objective(Z, y, s, lambda);
    for (int bt = 0; bt < 30 && new_obj > obj + 1e-15 * std::abs(obj); ++bt) {
      s.b0 = 0.5 * (s.b0 + start.b0);
      s.beta = 0.5 * (s.beta + start.beta);
      new_obj = lasso_objective(Z, y, s, lambda);
    }
    const double change = std::max(std::abs(s.b0 - start.b0), (s.beta - start.beta).cwiseAbs().maxCoeff());
    obj = new_obj;
    if (change < p.tol * 10) break;
  }
}

inline double lasso_min_ratio(const LassoParams& p, Eigen::Index n, Eigen::Index d) {
  if (p.lambda_min_ratio > 0) return p.lambda_min_ratio;
  return n > d ? 1e-3 : 1e-2;
}

}  // namespace detail

/// Log-spaced path from lambda_max down to lambda_max * min_ratio.
inline std::vector<double> lasso_lambda_path(double lambda_max, int count, double min_ratio) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    out.push_back(lambda_max * std::pow(min_ratio, frac));
  }
  return out;
}

/// Fits every lambda in `lambdas` (descending), each warm-started from the
/// previous solution. Z must already be standardized.
inline std::vector<std::pair<double, Eigen::VectorXd>> lasso_path_standardized(
    const Eigen::MatrixXd& Z, std::span<const int> y, const std::vector<double>& lambdas,
    const LassoParams& p) {
  double ybar = 0;
  for (int v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  const double null_b0 = logit(std::clamp(ybar, 1e-6, 1 - 1e-6));
  const double lmax = lasso_lambda_max(Z, y);
  detail::LassoState s{null_b0, Eigen::VectorXd::Zero(Z.cols())};
  std::vector<std::pair<double, Eigen::VectorXd>> out;
  for (double lam : lambdas) {
    if (lam >= lmax) {
      // the intercept-only fit already satisfies the optimality conditions
      s = {null_b0, Eigen::VectorXd::Zero(Z.cols())};
      out.emplace_back(s.b0, s.beta);
      continue;
    }
    detail::lasso_solve(Z, y, lam, s, p);
    out.emplace_back(s.b0, s.beta);
  }
  return out;
}

/// L1-penalized logistic regression along a lambda path; the returned model
/// uses the lambda with the best mean k-fold held-out AUC (ties go to the
/// larger lambda).
inline LassoModel fit_lasso(const Eigen::MatrixXd& X, std::span<const int> y, const LassoParams& p,
                            std::uint64_t seed) {
  LassoModel out;
  out.model.standardizer = Standardizer::fit(X, /*sample_sd=*/false);
  const Eigen::MatrixXd Z = out.model.standardizer.apply(X);
  if (!p.lambdas.empty()) {
    out.lambdas = p.lambdas;
  } else {
    out.lambdas = lasso_lambda_path(lasso_lambda_max(Z, y), p.n_lambda,
                                    detail::lasso_min_ratio(p, Z.rows(), Z.cols()));
  }
  const auto path = lasso_path_standardized(Z, y, out.lambdas, p);

  const std::vector<int> labels(y.begin(), y.end());
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t min_class = std::min(pos, labels.size() - pos);
  const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(p.folds), min_class));
  if (out.lambdas.size() > 1 && k >= 2) {
    const auto fold = stratified_folds(labels, k, seed);
    std::vector<double> total(out.lambdas.size(), 0.0);
    for (int f = 0; f < k; ++f) {
      const auto train = rows_where(fold, f, false);
      const auto test = rows_where(fold, f, true);
      Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train.size()), X.cols());
      std::vector<int> ytr, yte;
      for (std::size_t i = 0; i < train.size(); ++i) {
        Xtr.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(train[i]));
        ytr.push_back(labels[train[i]]);
      }
      Eigen::MatrixXd Xte(static_cast<Eigen::Index>(test.size()), X.cols());
      for (std::size_t i = 0; i < test.size(); ++i) {
        Xte.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(test[i]));
        yte.push_back(labels[test[i]]);
      }
      const auto st = Standardizer::fit(Xtr, false);
      const auto fold_path = lasso_path_standardized(st.apply(Xtr), ytr, out.lambdas, p);
      const Eigen::MatrixXd Zte = st.apply(Xte);
      for (std::size_t l = 0; l < out.lambdas.size(); ++l) {
        const Eigen::VectorXd s = (Zte * fold_path[l].second).array() + fold_path[l].first;
        total[l] += auc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), yte);
      }
    }
    for (double& t : total) t /= k;
    out.cv_auc = total;
    out.selected = 0;
    for (std::size_t l = 1; l < total.size(); ++l)
      if (total[l] > total[out.selected]) out.selected = l;
  } else {
    out.selected = out.lambdas.size() - 1;
  }
  out.model.intercept = path[out.selected].first;
  out.model.coef = path[out.selected].second;
  return out;
}

}  // namespace c2flow
