// Command-line entry point: generate, featurize, train, evaluate, predict,
// triage, and the end-to-end pipeline on a synthetic scenario.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

using namespace c2flow::tool;

namespace {

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto* o = cmd->add_option("--out", c.out, "Output directory (written atomically, with manifest.json)");
  if (out_required) o->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Host-centric C2 detection on flow records"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common common;

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a labeled synthetic scenario (flows, labels, event log)");
  add_common(g, common);
  g->add_option("--preset", gen.preset, "default or overlap")->capture_default_str();
  g->add_option("--scenario", gen.scenario, "key = value overrides for the scenario")->check(CLI::ExistingFile);

  FeaturizeArgs feat;
  auto* f = app.add_subcommand("featurize", "Flow files to a per-host, per-day feature matrix");
  add_common(f, common);
  f->add_option("--flows", feat.flows, "Flow file(s)")->required()->check(CLI::ExistingFile);
  f->add_option("--internal-space", feat.internal_space, "CIDR file, or comma-separated CIDRs")->required();
  f->add_option("--schema", feat.schema, "Column mapping file")->check(CLI::ExistingFile);
  f->add_option("--feature-config", feat.feature_config, "Feature settings file")->check(CLI::ExistingFile);
  f->add_option("--labels", feat.labels, "host_ip,label file to fill the label column")->check(CLI::ExistingFile);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Tune and fit the six base models and the stack");
  add_common(t, common, false);
  t->add_option("--features", train.features, "Feature matrix")->required()->check(CLI::ExistingFile);
  t->add_option("--labels", train.labels, "host_ip,label file")->check(CLI::ExistingFile);
  t->add_option("--model-dir", common.out, "Output model directory (alias of --out)");
  t->add_option("--folds", train.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  t->add_flag("--ablate-distributional", train.ablate, "Drop the packets/bytes/bpp distribution columns");
  t->add_flag("--logit-meta", train.logit_meta, "Feed logits instead of probabilities to the meta-learner");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Held-out AUC, sensitivity, bootstrap and permutation importance");
  add_common(e, common);
  e->add_option("--model-dir", ev.model_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--features", ev.features, "Labeled test feature matrix")->required()->check(CLI::ExistingFile);
  e->add_option("--labels", ev.labels, "host_ip,label file")->check(CLI::ExistingFile);
  e->add_option("--bootstrap", ev.bootstrap, "Bootstrap resamples")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_option("--threshold", ev.threshold, "Score threshold for sensitivity")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  e->add_option("--repeats", ev.repeats, "Permutations per feature")->capture_default_str()->check(CLI::PositiveNumber);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Score a feature matrix");
  add_common(p, common);
  p->add_option("--model-dir", pr.model_dir, "Trained model directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--features", pr.features, "Feature matrix")->required()->check(CLI::ExistingFile);
  p->add_option("--model", pr.model, "Model whose score fills the score column")->capture_default_str();

  TriageArgs tr;
  double threshold = 0.5;
  auto* r = app.add_subcommand("triage", "Filter scored hosts through lists and rules");
  add_common(r, common);
  r->add_option("--predictions", tr.predictions, "predictions.csv from predict")->required()->check(CLI::ExistingFile);
  r->add_option("--features", tr.features, "Feature matrix supplying rule inputs")->check(CLI::ExistingFile);
  r->add_option("--deny", tr.deny, "Denylist file(s)")->check(CLI::ExistingFile);
  r->add_option("--allow", tr.allow, "Allowlist file(s)")->check(CLI::ExistingFile);
  r->add_option("--cdn", tr.cdn, "CDN / cloud range file(s)")->check(CLI::ExistingFile);
  r->add_option("--sinkhole", tr.sinkhole, "Sinkhole file(s)")->check(CLI::ExistingFile);
  r->add_option("--triage-config", tr.triage_config, "Rule thresholds file")->check(CLI::ExistingFile);
  auto* thr = r->add_option("--threshold", threshold, "min_score rule threshold (overrides the config)")->check(CLI::Range(0.0, 1.0));

  PipelineArgs pipe;
  auto* l = app.add_subcommand("pipeline", "Generate, featurize, train, evaluate, predict and triage end to end");
  add_common(l, common);
  l->add_option("--preset", pipe.scenario.preset, "default or overlap")->capture_default_str();
  l->add_option("--scenario", pipe.scenario.scenario, "key = value scenario overrides")->check(CLI::ExistingFile);
  l->add_option("--folds", pipe.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  l->add_option("--bootstrap", pipe.bootstrap, "Bootstrap resamples")->capture_default_str()->check(CLI::PositiveNumber);
  l->add_option("--threshold", pipe.threshold, "Score threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  l->add_option("--repeats", pipe.repeats, "Permutations per feature")->capture_default_str()->check(CLI::PositiveNumber);
  l->add_flag("--ablate-distributional", pipe.ablate, "Drop the packets/bytes/bpp distribution columns");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) run_generate(common, gen);
    else if (*f) run_featurize(common, feat);
    else if (*t) {
      if (common.out.empty()) throw c2flow::InvalidArgument("train needs --model-dir or --out");
      run_train(common, train);
    } else if (*e) run_evaluate(common, ev);
    else if (*p) run_predict(common, pr);
    else if (*r) {
      if (thr->count() > 0) tr.threshold = threshold;
      run_triage(common, tr);
    } else if (*l) run_pipeline(common, pipe);
  } catch (const std::exception& ex) {
    std::cerr << "c2flow: error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
