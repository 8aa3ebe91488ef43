#include <gtest/gtest.h>

#include "../oracles/oof_oracle.hpp"
#include "test_support.hpp"

using namespace c2flow;
using testing_support::random_dataset;

namespace {

std::vector<BaseSpec> small_specs() {
  std::vector<BaseSpec> specs;
  for (auto k : kBaseKinds) {
    auto p = default_grid(k).front();
    if (p.contains("trees")) p["trees"] = 15;
    if (k == ModelKind::lasso) p = {{"n_lambda", 8}, {"folds", 3}};
    specs.push_back({k, p});
  }
  return specs;
}

/// Label depends on the sign pattern of x0 and x1, which no linear model sees.
LabeledDataset xor_dataset(std::size_t n, std::uint64_t seed) {
  auto ds = random_dataset(n, 4, seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ds.y[i] = (ds.X(r, 0) > 0) != (ds.X(r, 1) > 0) ? 1 : 0;
  }
  return ds;
}

}  // namespace

TEST(MetaNames, KindsInOrderWithDuplicatesSuffixed) {
  EXPECT_EQ(meta_feature_names(default_base_specs()),
            (std::vector<std::string>{"rf", "pca_rf", "gbm", "gbm2", "glm", "lasso"}));
  EXPECT_EQ(meta_feature_names({{ModelKind::glm, {}}, {ModelKind::glm, {}}}),
            (std::vector<std::string>{"glm#0", "glm#1"}));
}

TEST(Oof, ConstantBaseGivesConstantColumn) {
  const auto ds = random_dataset(40, 3, 1);
  const auto fold = stratified_folds(ds.y, 5, 1);
  const auto oof = oof_matrix(ds, {{ModelKind::glm, {}}}, fold, 1,
                              [](const BaseSpec&, const LabeledDataset&, const LabeledDataset& test, std::uint64_t) {
                                return std::vector<double>(test.rows(), 0.5);
                              });
  for (Eigen::Index i = 0; i < oof.rows(); ++i) EXPECT_EQ(oof(i, 0), 0.5);
}

TEST(Oof, LeaveOneOutLabelProbe) {
  auto ds = random_dataset(10, 2, 2);
  ds.y = {1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  std::vector<int> fold(10);
  std::iota(fold.begin(), fold.end(), 0);
  const std::vector<BaseSpec> nn = {{ModelKind::rf, {{"trees", 1}, {"mtry", "all"}, {"bootstrap", false}}}};
  const auto base = oof_matrix(ds, nn, fold, 3, ArtifactFitter{});
  for (std::size_t i = 0; i < 10; ++i) {
    auto flipped = ds;
    flipped.y[i] = 1 - flipped.y[i];
    const auto oof = oof_matrix(flipped, nn, fold, 3, ArtifactFitter{});
    EXPECT_EQ(oof(static_cast<Eigen::Index>(i), 0), base(static_cast<Eigen::Index>(i), 0)) << "row " << i;
  }
}

TEST(Oof, MatchesFoldLoopOracle) {
  const auto ds = random_dataset(200, 5, 4);
  const auto specs = small_specs();
  const auto fold = stratified_folds(ds.y, 5, 9);
  const auto oof = oof_matrix(ds, specs, fold, 9, ArtifactFitter{}, 2);
  const auto ref = oracle::fold_loop_oof(ds, specs, fold, 9);
  EXPECT_EQ(oof, ref);
}

TEST(Oof, StratifiedFoldsKeepBothClassesInTraining) {
  std::vector<int> y = {1, 1, 0, 0, 0, 0, 0, 0};
  const auto fold = stratified_folds(y, 8, 1);
  for (int f = 0; f < 8; ++f) {
    int pos = 0, neg = 0;
    for (auto i : rows_where(fold, f, false)) (y[i] ? pos : neg)++;
    EXPECT_GT(pos, 0);
    EXPECT_GT(neg, 0);
  }
  EXPECT_THROW(stratified_folds({1, 0, 0, 0}, 2, 1), InvalidArgument);
  EXPECT_THROW(stratified_folds({1, 1, 0, 0}, 5, 1), InvalidArgument);
}

TEST(Stack, DominantBaseGetsLargestWeight) {
  // meta level: one perfect column, five noise columns
  auto rng = make_rng(5, {});
  LabeledDataset meta;
  const int n = 200;
  meta.X.resize(n, 6);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    meta.y.push_back(y);
    meta.row_keys.push_back({});
    meta.X(i, 0) = 0.3 + 0.4 * y + 0.05 * uniform01(rng);
    for (int m = 1; m < 6; ++m) meta.X(i, m) = uniform01(rng);
  }
  meta.feature_names = meta_feature_names(default_base_specs());
  const auto m = fit_model(ModelKind::glm, {}, meta, 1);
  const auto [b0, b] = std::get<LogisticModel>(m.body).raw_coefficients();
  for (int j = 1; j < 6; ++j) EXPECT_GT(b(0), std::abs(b(j)));
  EXPECT_GT(b(0), 0);

  // full stack on data only the tree learners can model
  const auto ds = xor_dataset(200, 6);
  const auto s = fit_stack(ds, small_specs(), 5, 7);
  double best_oof = 0;
  for (const auto& [k, v] : s.training_meta["oof_auc"].items()) best_oof = std::max(best_oof, v.get<double>());
  EXPECT_GE(auc(predict_stack(s, ds), ds.y), best_oof);
}

TEST(Stack, IdenticalBasesPreserveAuc) {
  const auto train = random_dataset(150, 3, 8);
  const auto test = random_dataset(150, 3, 9);
  const std::vector<BaseSpec> same(6, BaseSpec{ModelKind::glm, {}});
  const auto s = fit_stack(train, same, 5, 1);
  const auto base = predict_proba(s.base_models[0], test);
  EXPECT_EQ(auc(predict_stack(s, test), test.y), auc(base, test.y));
}

TEST(Stack, RegionSpecialistsCombine) {
  // x0 < 0: label follows x1 linearly; x0 >= 0: label follows |x2| > 0.7
  auto make = [](std::uint64_t seed) {
    auto ds = random_dataset(400, 4, seed, 0);
    auto rng = make_rng(seed, {7});
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double z = ds.X(r, 0) < 0 ? 3 * ds.X(r, 1) : (std::abs(ds.X(r, 2)) > 0.7 ? 3.0 : -3.0);
      ds.y[i] = uniform01(rng) < sigmoid(z) ? 1 : 0;
    }
    return ds;
  };
  const auto train = make(10), test = make(11);
  const auto s = fit_stack(train, small_specs(), 5, 2);
  double best = 0;
  for (const auto& b : s.base_models) best = std::max(best, auc(predict_proba(b, test), test.y));
  EXPECT_GE(auc(predict_stack(s, test), test.y), best - 0.01);
}

TEST(Stack, ZeroSlopeMetaIsConstant) {
  const auto ds = random_dataset(60, 2, 12);
  StackModel s;
  s.base_specs = {{ModelKind::glm, {}}};
  s.base_models = {fit_model(ModelKind::glm, {}, ds, 1)};
  s.feature_names = ds.feature_names;
  LogisticModel meta;
  meta.standardizer.means = Eigen::VectorXd::Zero(1);
  meta.standardizer.scales = Eigen::VectorXd::Ones(1);
  meta.coef = Eigen::VectorXd::Zero(1);
  meta.intercept = 0.3;
  s.meta.kind = ModelKind::glm;
  s.meta.feature_names = {"glm"};
  s.meta.body = meta;
  for (double v : predict_stack(s, ds)) EXPECT_DOUBLE_EQ(v, sigmoid(0.3));
}

TEST(Stack, DuplicatedRowsAndRoundTrip) {
  const auto ds = random_dataset(120, 3, 13);
  const auto s = fit_stack(ds, small_specs(), 4, 3);
  Eigen::MatrixXd five(5, 3);
  for (int i = 0; i < 5; ++i) five.row(i) = ds.X.row(7);
  const auto p = predict_stack(s, five, ds.feature_names);
  for (double v : p) EXPECT_EQ(v, p[0]);

  const auto probe = random_dataset(100, 3, 14);
  const auto back = stack_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(predict_stack(s, probe), predict_stack(back, probe));
  EXPECT_EQ(s.base_models.size(), 6u);
}

TEST(Stack, DeterministicForSeedAndJobs) {
  const auto ds = random_dataset(80, 3, 15);
  const auto a = fit_stack(ds, small_specs(), 4, 3, {1, false});
  const auto b = fit_stack(ds, small_specs(), 4, 3, {3, false});
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Stack, LogitInputsSwitch) {
  const auto ds = random_dataset(80, 3, 16);
  const auto s = fit_stack(ds, small_specs(), 4, 3, {1, true});
  EXPECT_TRUE(s.logit_inputs);
  const auto back = stack_from_json(to_json(s));
  EXPECT_EQ(predict_stack(s, ds), predict_stack(back, ds));
}
