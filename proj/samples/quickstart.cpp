// Generate a small labeled day, featurize it and score a random forest on a
// second day.

#include <iostream>

#include "c2flow/c2flow.hpp"

int main() {
  using namespace c2flow;
  ScenarioConfig cfg;
  cfg.n_benign_hosts = 120;
  cfg.n_c2_hosts = 20;
  cfg.seed = 11;
  ScenarioConfig next = cfg;
  next.seed = 12;
  next.day = cfg.day.next();

  const auto space = InternalSpace::parse(kSynthInternalSpace);
  auto featurize = [&](const ScenarioConfig& sc) {
    const auto g = generate(sc);
    auto table = FeatureTable::featurize(g.flows, space, FeatureConfig{});
    apply_labels(table, g.labels);
    return LabeledDataset::from_table(table);
  };
  const auto train = featurize(cfg);
  const auto test = featurize(next);

  const auto rf = fit_model(ModelKind::rf, {{"trees", 200}}, train, 5);
  const auto scores = predict_proba(rf, test);
  std::cout << "hosts: " << train.rows() << " train, " << test.rows() << " test\n"
            << "held-out AUC: " << auc(scores, test.y) << '\n'
            << "sensitivity at 0.5: " << sensitivity(scores, test.y, 0.5) << '\n';
}
