#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "c2flow/common.hpp"

namespace c2flow {

inline constexpr int kUnlimitedDepth = -1;

struct TreeParams {
  int max_depth = kUnlimitedDepth;  // 0 grows a single leaf
  int min_leaf = 1;                 // minimum samples per child
  int mtry = 0;                     // features tried per split; 0 = all
  double lambda = 0.0;              // newton only: L2 on leaf weights
  double gamma = 0.0;               // newton only: minimum split gain
};

/// How a tree scores splits and sets leaf values.
///  - gini:          binary targets, Gini impurity decrease, leaf = class-1 frequency
///  - squared_error: real targets, SSE reduction, leaf = mean
///  - newton:        gradient/hessian pairs, leaf = -G/(H+lambda)
enum class SplitCriterion { gini, squared_error, newton };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  /// Rows with x[feature] <= threshold go left.
  template <class Row>
  double predict_row(const Row& x) const {
    int n = 0;
    while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes_[static_cast<std::size_t>(n)];
      n = x(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(n)].value;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X.row(i));
    return out;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool is_leaf() const { return nodes_.size() == 1; }

  int depth() const { return depth_from(0); }

  nlohmann::json to_json() const {
    nlohmann::json f = nlohmann::json::array(), t = nlohmann::json::array(),
                   l = nlohmann::json::array(), r = nlohmann::json::array(),
                   v = nlohmann::json::array();
    for (const auto& n : nodes_) {
      f.push_back(n.feature);
      t.push_back(n.threshold);
      l.push_back(n.left);
      r.push_back(n.right);
      v.push_back(n.value);
    }
    return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    const auto& f = j.at("feature");
    std::vector<TreeNode> nodes(f.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      nodes[i].feature = f[i].get<int>();
      nodes[i].threshold = j.at("threshold")[i].get<double>();
      nodes[i].left = j.at("left")[i].get<int>();
      nodes[i].right = j.at("right")[i].get<int>();
      nodes[i].value = j.at("value")[i].get<double>();
    }
    for (const auto& n : nodes) {
      const auto size = static_cast<int>(nodes.size());
      if (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size))
        throw FormatError("tree node references a child outside the tree");
    }
    if (nodes.empty()) throw FormatError("tree has no nodes");
    return DecisionTree(std::move(nodes));
  }

  bool operator==(const DecisionTree&) const = default;

 private:
  int depth_from(int n) const {
    const auto& node = nodes_[static_cast<std::size_t>(n)];
    if (node.feature < 0) return 0;
    return 1 + std::max(depth_from(node.left), depth_from(node.right));
  }

  std::vector<TreeNode> nodes_;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, std::span<const double> a, std::span<const double> b,
              SplitCriterion crit, const TreeParams& p, Rng* rng)
      : X_(X), a_(a), b_(b), crit_(crit), p_(p), rng_(rng) {
    const auto d = static_cast<int>(X.cols());
    mtry_ = (p.mtry <= 0 || p.mtry >= d) ? d : p.mtry;
    all_features_.resize(static_cast<std::size_t>(d));
    std::iota(all_features_.begin(), all_features_.end(), 0);
    lambda_ = crit == SplitCriterion::newton ? p.lambda : 0.0;
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  struct Sums {
    double a = 0, b = 0;
    std::size_t n = 0;
  };

  double score(double a, double b) const { return a * a / (b + lambda_); }

  double leaf_value(const Sums& s) const {
    if (crit_ == SplitCriterion::newton) return -s.a / (s.b + lambda_);
    return s.n == 0 ? 0.0 : s.a / s.b;
  }

  double gain(const Sums& l, const Sums& r, const Sums& all) const {
    const double raw = score(l.a, l.b) + score(r.a, r.b) - score(all.a, all.b);
    switch (crit_) {
      case SplitCriterion::gini: return 2.0 * raw;  // n * Gini decrease for 0/1 targets
      case SplitCriterion::squared_error: return raw;
      case SplitCriterion::newton: return 0.5 * raw - p_.gamma;
    }
    return raw;
  }

  std::vector<int> candidate_features() {
    if (mtry_ == static_cast<int>(all_features_.size())) return all_features_;
    std::vector<int> pool = all_features_;
    for (int i = 0; i < mtry_; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index(*rng_, pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(mtry_));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  int grow(std::vector<std::size_t>& rows, int depth) {
    Sums all;
    for (auto i : rows) {
      all.a += a_[i];
      all.b += b_[i];
      ++all.n;
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, leaf_value(all)});

    const bool depth_ok = p_.max_depth < 0 || depth < p_.max_depth;
    const auto min_leaf = static_cast<std::size_t>(std::max(p_.min_leaf, 1));
    if (!depth_ok || rows.size() < 2 * min_leaf) return id;

    // Best split; strict improvement keeps the lowest feature, then lowest threshold.
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = crit_ == SplitCriterion::newton ? 0.0 : 1e-12;
    std::vector<std::size_t> order(rows);
    for (int f : candidate_features()) {
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return X_(static_cast<Eigen::Index>(x), f) < X_(static_cast<Eigen::Index>(y), f);
      });
      Sums left;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const auto i = order[k];
        left.a += a_[i];
        left.b += b_[i];
        ++left.n;
        const double xv = X_(static_cast<Eigen::Index>(i), f);
        const double xn = X_(static_cast<Eigen::Index>(order[k + 1]), f);
        if (xv == xn) continue;
        if (left.n < min_leaf || rows.size() - left.n < min_leaf) continue;
        const Sums right{all.a - left.a, all.b - left.b, all.n - left.n};
        const double g = gain(left, right, all);
        if (g > best_gain + 1e-12 * std::abs(best_gain)) {
          best_gain = g;
          best_feature = f;
          double mid = xv + (xn - xv) / 2.0;
          if (!(mid < xn)) mid = xv;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto i : rows)
      (X_(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? lrows : rrows).push_back(i);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int l = grow(lrows, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    const int r = grow(rrows, depth + 1);
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Eigen::MatrixXd& X_;
  std::span<const double> a_;
  std::span<const double> b_;
  SplitCriterion crit_;
  TreeParams p_;
  Rng* rng_;
  int mtry_ = 0;
  double lambda_ = 0.0;
  std::vector<int> all_features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Classification tree on 0/1 labels, grown over `rows` (duplicates allowed,
/// as produced by bootstrap sampling).
inline DecisionTree fit_classification_tree(const Eigen::MatrixXd& X, std::span<const int> y,
                                            std::vector<std::size_t> rows, const TreeParams& p,
                                            Rng& rng) {
  std::vector<double> a(y.size()), b(y.size(), 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) a[i] = y[i];
  return detail::TreeBuilder(X, a, b, SplitCriterion::gini, p, &rng).build(std::move(rows));
}

inline DecisionTree fit_classification_tree(const Eigen::MatrixXd& X, std::span<const int> y,
                                            const TreeParams& p, Rng& rng) {
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_classification_tree(X, y, std::move(rows), p, rng);
}

/// Least-squares regression tree on real targets.
inline DecisionTree fit_regression_tree(const Eigen::MatrixXd& X, std::span<const double> target,
                                        std::vector<std::size_t> rows, const TreeParams& p,
                                        Rng& rng) {
  std::vector<double> b(target.size(), 1.0);
  return detail::TreeBuilder(X, target, b, SplitCriterion::squared_error, p, &rng)
      .build(std::move(rows));
}

/// Second-order tree on per-row gradients and hessians.
inline DecisionTree fit_newton_tree(const Eigen::MatrixXd& X, std::span<const double> grad,
                                    std::span<const double> hess, std::vector<std::size_t> rows,
                                    const TreeParams& p, Rng& rng) {
  return detail::TreeBuilder(X, grad, hess, SplitCriterion::newton, p, &rng).build(std::move(rows));
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace c2flow
