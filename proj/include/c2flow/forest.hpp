#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/tree.hpp"

namespace c2flow {

struct ForestParams {
  int trees = 300;
  std::string mtry = "sqrt";  // "sqrt", "third", "all", or a positive integer
  int max_depth = kUnlimitedDepth;
  int min_leaf = 1;
  bool bootstrap = true;

  int resolve_mtry(int d) const {
    if (mtry == "sqrt") return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
    if (mtry == "third") return std::max(1, d / 3);
    if (mtry == "all") return d;
    int m = 0;
    if (!parse_number(mtry, m) || m < 1) throw InvalidArgument("invalid mtry '" + mtry + "'");
    return std::min(m, d);
  }
};

inline void to_json(nlohmann::json& j, const ForestParams& p) {
  j = {{"trees", p.trees}, {"mtry", p.mtry}, {"max_depth", p.max_depth},
       {"min_leaf", p.min_leaf}, {"bootstrap", p.bootstrap}};
}

inline void from_json(const nlohmann::json& j, ForestParams& p) {
  p = ForestParams{};
  if (j.contains("trees")) j.at("trees").get_to(p.trees);
  if (j.contains("mtry")) {
    const auto& m = j.at("mtry");
    p.mtry = m.is_string() ? m.get<std::string>() : std::to_string(m.get<int>());
  }
  if (j.contains("max_depth")) j.at("max_depth").get_to(p.max_depth);
  if (j.contains("min_leaf")) j.at("min_leaf").get_to(p.min_leaf);
  if (j.contains("bootstrap")) j.at("bootstrap").get_to(p.bootstrap);
  if (p.trees < 1) throw InvalidArgument("forest needs at least one tree");
}

/// Bagged classification trees; the score is the mean leaf frequency.
struct RandomForest {
  std::vector<DecisionTree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : trees) out += t.predict(X);
    return out / static_cast<double>(trees.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"trees", arr}};
  }

  static RandomForest from_json(const nlohmann::json& j) {
    RandomForest f;
    for (const auto& t : j.at("trees")) f.trees.push_back(DecisionTree::from_json(t));
    if (f.trees.empty()) throw FormatError("forest has no trees");
    return f;
  }

  bool operator==(const RandomForest&) const = default;
};

/// Tree t draws its bootstrap sample and split features from stream (seed, t),
/// so the forest is identical for any job count.
inline RandomForest fit_random_forest(const Eigen::MatrixXd& X, std::span<const int> y,
                                      const ForestParams& p, std::uint64_t seed, int jobs = 1) {
  const auto n = static_cast<std::size_t>(X.rows());
  TreeParams tp;
  tp.max_depth = p.max_depth;
  tp.min_leaf = p.min_leaf;
  tp.mtry = p.resolve_mtry(static_cast<int>(X.cols()));

  RandomForest forest;
  forest.trees.resize(static_cast<std::size_t>(p.trees));
  parallel_for(forest.trees.size(), jobs, [&](std::size_t t) {
    auto rng = make_rng(seed, {t});
    std::vector<std::size_t> rows(n);
    if (p.bootstrap)
      for (auto& r : rows) r = uniform_index(rng, n);
    else
      rows = all_rows(n);
    forest.trees[t] = fit_classification_tree(X, y, std::move(rows), tp, rng);
  });
  return forest;
}

}  // namespace c2flow
