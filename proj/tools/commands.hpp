#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "c2flow/c2flow.hpp"
#include "run_support.hpp"

namespace c2flow::tool {

struct Common {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;
};

inline std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  return out;
}

inline void log(const std::string& msg) { std::cerr << "c2flow: " << msg << '\n'; }

/// A file of CIDRs, or the CIDRs themselves separated by commas.
inline InternalSpace resolve_internal_space(const std::string& arg) {
  if (fs::is_regular_file(arg)) return InternalSpace::load(arg);
  try {
    return InternalSpace::parse(arg);
  } catch (const Error&) {
    throw InvalidArgument("--internal-space '" + arg + "' is neither a readable file nor a CIDR list");
  }
}

/// Rethrows any library error with the offending file named first.
template <class Fn>
auto with_context(const std::string& file, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.starts_with(file)) throw;
    throw Error(file + ": " + msg);
  }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string preset = "default";
  std::string scenario;  // optional key=value overrides
};

inline ScenarioConfig scenario_for(const GenerateArgs& a, std::uint64_t seed) {
  ScenarioConfig base;
  if (a.preset == "overlap")
    base = ScenarioConfig::overlap();
  else if (a.preset != "default")
    throw InvalidArgument("unknown --preset '" + a.preset + "' (default, overlap)");
  base.seed = seed;
  return a.scenario.empty() ? base : ScenarioConfig::load(a.scenario, base);
}

inline void write_scenario(const GeneratedScenario& g, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "flows.csv");
    write_flows(out, g.flows);
  }
  {
    auto out = open_output(dir / "labels.csv");
    write_labels(out, g.labels);
  }
  auto out = open_output(dir / "events.csv");
  write_events(out, g.events);
}

inline void run_generate(const Common& c, const GenerateArgs& a) {
  auto manifest = start_manifest("generate", c.seed, c.jobs);
  manifest["config"] = {{"preset", a.preset}, {"scenario", a.scenario}};
  if (!a.scenario.empty()) record_input(manifest, a.scenario);
  StagedOutput out(c.out);
  const auto cfg = scenario_for(a, c.seed);
  const auto g = generate(cfg, c.jobs);
  write_scenario(g, out.staging());
  log("generated " + std::to_string(g.flows.size()) + " flows for " + std::to_string(g.labels.size()) + " hosts");
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

struct FeaturizeArgs {
  std::vector<std::string> flows;
  std::string schema;
  std::string internal_space;
  std::string feature_config;
  std::string labels;
};

/// Ingests, aggregates and featurizes; writes features.csv and ingest.json into dir.
inline FeatureTable featurize_into(const FeaturizeArgs& a, int jobs, const fs::path& dir) {
  if (a.flows.empty()) throw InvalidArgument("featurize needs at least one --flows file");
  if (a.internal_space.empty()) throw InvalidArgument("featurize needs --internal-space");
  const auto schema = a.schema.empty() ? FlowSchema::canonical()
                                       : with_context(a.schema, [&] { return FlowSchema::load(a.schema); });
  const auto cfg = a.feature_config.empty()
                       ? FeatureConfig{}
                       : with_context(a.feature_config, [&] { return FeatureConfig::load(a.feature_config); });
  const auto space = resolve_internal_space(a.internal_space);

  std::vector<FlowRecord> records;
  IngestStats stats;
  nlohmann::json per_file = nlohmann::json::object();
  for (const auto& f : a.flows) {
    auto parsed = parse_flow_file(f, schema);
    // relative to the output so staging paths never leak into outputs
    per_file[fs::absolute(f).lexically_relative(fs::absolute(dir)).generic_string()] = {{"lines_read", parsed.stats.lines_read},
                   {"records_accepted", parsed.stats.records_accepted},
                   {"records_rejected", parsed.stats.records_rejected},
                   {"reject_reasons", parsed.stats.reject_reasons}};
    stats += parsed.stats;
    records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                   std::make_move_iterator(parsed.records.end()));
  }
  auto table = FeatureTable::featurize(records, space, cfg, jobs);
  if (!a.labels.empty()) apply_labels(table, with_context(a.labels, [&] { return load_labels(a.labels); }));

  fs::create_directories(dir);
  {
    auto out = open_output(dir / "features.csv");
    table.write(out);
  }
  auto out = open_output(dir / "ingest.json");
  out << nlohmann::json{{"files", per_file},
                        {"records_accepted", stats.records_accepted},
                        {"records_rejected", stats.records_rejected},
                        {"host_days", table.rows.size()}}
             .dump(1)
      << '\n';
  if (stats.records_rejected > 0)
    log("rejected " + std::to_string(stats.records_rejected) + " of " + std::to_string(stats.lines_read) +
        " flow lines (see ingest.json)");
  return table;
}

inline void run_featurize(const Common& c, const FeaturizeArgs& a) {
  auto manifest = start_manifest("featurize", c.seed, c.jobs);
  manifest["config"] = {{"schema", a.schema}, {"internal_space", a.internal_space},
                        {"feature_config", a.feature_config}, {"labels", a.labels}};
  for (const auto& f : a.flows) record_input(manifest, f);
  StagedOutput out(c.out);
  const auto t = featurize_into(a, c.jobs, out.staging());
  log("featurized " + std::to_string(t.rows.size()) + " host-days");
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string features;
  std::string labels;  // optional when the feature file carries labels
  int folds = 10;
  bool ablate = false;
  bool logit_meta = false;
};

inline LabeledDataset load_labeled(const std::string& features, const std::string& labels) {
  auto table = with_context(features, [&] { return FeatureTable::load(features); });
  if (!labels.empty()) apply_labels(table, with_context(labels, [&] { return load_labels(labels); }));
  auto d = LabeledDataset::from_table(table);
  if (d.rows() == 0)
    throw InvalidArgument(features + ": no labeled rows" + (labels.empty() ? " (pass --labels)" : ""));
  return d;
}

inline void train_into(const TrainArgs& a, std::uint64_t seed, int jobs, const fs::path& dir) {
  auto data = load_labeled(a.features, a.labels);
  if (a.ablate) data = data.without_distributional();
  data.validate();

  fs::create_directories(dir);
  std::vector<BaseSpec> specs;
  std::vector<std::pair<std::string, CvResult>> cv;
  nlohmann::json cv_json = nlohmann::json::object();
  for (std::size_t m = 0; m < kBaseKinds.size(); ++m) {
    const auto kind = kBaseKinds[m];
    const auto grid = default_grid(kind);
    auto r = cv_tune(data, kind, grid, a.folds, derive_seed(seed, {m}), jobs);
    log("tuned " + to_string(kind) + ": cv auc " + format_double(r.mean_auc[r.chosen]));
    specs.push_back({kind, r.chosen_params});
    cv_json[to_string(kind)] = to_json(r);
    cv.emplace_back(to_string(kind), std::move(r));
  }
  const auto stack = fit_stack(data, specs, a.folds, seed, {jobs, a.logit_meta});
  for (std::size_t m = 0; m < stack.base_models.size(); ++m)
    save_json_file((dir / (to_string(stack.base_models[m].kind) + ".json")).string(), to_json(stack.base_models[m]));
  save_json_file((dir / "stack.json").string(), to_json(stack));
  save_json_file((dir / "cv.json").string(), cv_json);
  auto out = open_output(dir / "cv_table.csv");
  write_cv_table(out, cv);
  log("trained " + std::to_string(stack.base_models.size()) + " base models and the stack on " +
      std::to_string(data.rows()) + " rows");
}

inline void run_train(const Common& c, const TrainArgs& a) {
  auto manifest = start_manifest("train", c.seed, c.jobs);
  manifest["config"] = {{"folds", a.folds}, {"ablate_distributional", a.ablate}, {"logit_meta", a.logit_meta}};
  record_input(manifest, a.features);
  if (!a.labels.empty()) record_input(manifest, a.labels);
  StagedOutput out(c.out);
  train_into(a, c.seed, c.jobs, out.staging());
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// Loading a model directory
// ---------------------------------------------------------------------------

struct ModelSet {
  std::vector<ModelArtifact> bases;
  StackModel stack;
};

inline ModelSet load_model_dir(const std::string& dir) {
  ModelSet s;
  for (auto k : kBaseKinds) {
    const auto p = (fs::path(dir) / (to_string(k) + ".json")).string();
    if (!fs::exists(p)) throw Error("model directory '" + dir + "' has no " + to_string(k) + ".json");
    s.bases.push_back(load_model(p));
  }
  const auto sp = (fs::path(dir) / "stack.json").string();
  if (!fs::exists(sp)) throw Error("model directory '" + dir + "' has no stack.json");
  s.stack = load_stack(sp);
  return s;
}

/// Scores from every model, keyed by kind name, in base order then "stack".
inline std::vector<std::pair<std::string, std::vector<double>>> score_all(const ModelSet& ms, const Eigen::MatrixXd& X,
                                                                          const std::vector<std::string>& names,
                                                                          const std::string& origin) {
  return with_context(origin, [&] {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& m : ms.bases) out.emplace_back(to_string(m.kind), predict_proba(m, X, names));
    out.emplace_back("stack", predict_stack(ms.stack, X, names));
    return out;
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model_dir;
  std::string features;
  std::string labels;
  std::size_t bootstrap = 1000;
  double threshold = 0.5;
  int repeats = 5;
};

inline void evaluate_into(const EvaluateArgs& a, std::uint64_t seed, int jobs, const fs::path& dir) {
  const auto ms = load_model_dir(a.model_dir);
  const auto data = load_labeled(a.features, a.labels);
  data.validate();
  const auto scores = score_all(ms, data.X, data.feature_names, a.features);

  fs::create_directories(dir);
  std::vector<EvaluationReport> reports;
  nlohmann::json eval = nlohmann::json::object(), imp = nlohmann::json::object();
  auto imp_out = open_output(dir / "importance.csv");
  auto summary = open_output(dir / "summary.csv");
  summary << "model,point_auc,point_sensitivity,threshold,mean_bootstrap_auc,mean_bootstrap_sensitivity\n";
  for (std::size_t m = 0; m < scores.size(); ++m) {
    const auto& [name, s] = scores[m];
    BootstrapOptions bo;
    bo.threshold = a.threshold;
    bo.jobs = jobs;
    reports.push_back(evaluate_scores(name, s, data.y, a.bootstrap, derive_seed(seed, {m, 0}), bo));
    const auto& r = reports.back();
    eval[name] = to_json(r);
    summary << name << ',' << format_double(r.point_auc) << ',' << format_double(r.point_sensitivity) << ','
            << format_double(r.threshold) << ',' << format_double(r.mean_bootstrap_auc()) << ','
            << format_double(r.mean_bootstrap_sensitivity()) << '\n';

    const auto isd = derive_seed(seed, {m, 1});
    const auto rep = m < ms.bases.size() ? permutation_importance(ms.bases[m], data, a.repeats, isd, jobs)
                                         : permutation_importance(ms.stack, data, a.repeats, isd, jobs);
    imp[name] = to_json(rep);
    write_importance_table(imp_out, name, rep, m == 0);
    log(name + ": auc " + format_double(r.point_auc) + ", sensitivity " + format_double(r.point_sensitivity));
  }
  save_json_file((dir / "evaluation.json").string(), eval);
  save_json_file((dir / "importance.json").string(), imp);
  auto out = open_output(dir / "bootstrap.csv");
  write_bootstrap_table(out, reports);
}

inline void run_evaluate(const Common& c, const EvaluateArgs& a) {
  auto manifest = start_manifest("evaluate", c.seed, c.jobs);
  manifest["config"] = {{"model_dir", a.model_dir}, {"bootstrap", a.bootstrap}, {"threshold", a.threshold},
                        {"repeats", a.repeats}};
  record_input(manifest, a.features);
  if (!a.labels.empty()) record_input(manifest, a.labels);
  StagedOutput out(c.out);
  evaluate_into(a, c.seed, c.jobs, out.staging());
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model_dir;
  std::string features;
  std::string model = "stack";
};

inline void predict_into(const PredictArgs& a, const fs::path& dir) {
  const auto ms = load_model_dir(a.model_dir);
  const auto table = with_context(a.features, [&] { return FeatureTable::load(a.features); });
  Eigen::MatrixXd X(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < table.names.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i].values[j];
  const auto scores = score_all(ms, X, table.names, a.features);
  std::size_t chosen = scores.size();
  for (std::size_t m = 0; m < scores.size(); ++m)
    if (scores[m].first == a.model) chosen = m;
  if (chosen == scores.size()) throw InvalidArgument("--model '" + a.model + "' is not in the model directory");

  fs::create_directories(dir);
  auto out = open_output(dir / "predictions.csv");
  out << "host_ip,window_date,score";
  for (const auto& [name, s] : scores) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out << table.rows[i].host_ip.to_string() << ',' << table.rows[i].window_date.to_string() << ','
        << format_double(scores[chosen].second[i]);
    for (const auto& [name, s] : scores) out << ',' << format_double(s[i]);
    out << '\n';
  }
}

inline void run_predict(const Common& c, const PredictArgs& a) {
  auto manifest = start_manifest("predict", c.seed, c.jobs);
  manifest["config"] = {{"model_dir", a.model_dir}, {"model", a.model}};
  record_input(manifest, a.features);
  StagedOutput out(c.out);
  predict_into(a, out.staging());
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// triage
// ---------------------------------------------------------------------------

struct TriageArgs {
  std::string predictions;
  std::string features;  // supplies the rule features
  std::vector<std::string> deny, allow, cdn, sinkhole;
  std::string triage_config;
  std::optional<double> threshold;
};

struct PredictionRow {
  IpAddress host_ip;
  CalendarDay window_date;
  double score = 0;
};

inline std::vector<PredictionRow> load_predictions(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
  const auto head = split(trim(line), ',');
  if (head.size() < 3 || head[0] != "host_ip" || head[1] != "window_date" || head[2] != "score")
    throw FormatError(path + ": header must start with host_ip,window_date,score");
  std::vector<PredictionRow> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    const auto where = path + ":" + std::to_string(lineno);
    if (cells.size() < 3) throw FormatError(where + ": expected host_ip,window_date,score");
    auto ip = IpAddress::parse(cells[0]);
    auto day = CalendarDay::parse(cells[1]);
    double s = 0;
    if (!ip) throw FormatError(where + ": invalid host_ip '" + std::string(cells[0]) + "'");
    if (!day) throw FormatError(where + ": invalid window_date '" + std::string(cells[1]) + "'");
    if (!parse_number(cells[2], s)) throw FormatError(where + ": invalid score '" + std::string(cells[2]) + "'");
    out.push_back({*ip, *day, s});
  }
  return out;
}

inline std::vector<TriageDecision> triage_into(const TriageArgs& a, int jobs, const fs::path& dir) {
  auto cfg = a.triage_config.empty()
                 ? TriageConfig{}
                 : with_context(a.triage_config, [&] { return TriageConfig::load(a.triage_config); });
  if (a.threshold) cfg.threshold = *a.threshold;
  const auto rules = default_rules(cfg);

  std::vector<IpListSource> lists;
  nlohmann::json list_info = nlohmann::json::array();
  auto add_lists = [&](const std::vector<std::string>& paths, ListKind kind) {
    for (const auto& p : paths) {
      lists.push_back(load_ip_list(p, kind));
      nlohmann::json bad = nlohmann::json::array();
      for (const auto& l : lists.back().invalid_lines) bad.push_back({{"line", l.line}, {"text", l.text}});
      list_info.push_back({{"path", p}, {"kind", to_string(kind)}, {"entries", lists.back().size()},
                           {"invalid_lines", bad}});
      if (!bad.empty()) log(p + ": skipped " + std::to_string(bad.size()) + " invalid line(s)");
    }
  };
  add_lists(a.deny, ListKind::deny);
  add_lists(a.allow, ListKind::allow);
  add_lists(a.cdn, ListKind::cdn_cloud);
  add_lists(a.sinkhole, ListKind::sinkhole);

  const auto preds = load_predictions(a.predictions);
  std::map<HostDayKey, const FeatureRow*> feat_rows;
  FeatureTable table;
  if (!a.features.empty()) {
    table = with_context(a.features, [&] { return FeatureTable::load(a.features); });
    for (const auto& f : rule_features())
      if (!table.column(f)) throw InvalidArgument(a.features + ": missing rule feature column '" + f + "'");
    for (const auto& r : table.rows) feat_rows[{r.host_ip, r.window_date}] = &r;
  }
  std::vector<HostEvidence> evidence;
  for (const auto& p : preds) {
    HostEvidence h{p.host_ip, p.window_date, p.score, {}};
    if (auto it = feat_rows.find({p.host_ip, p.window_date}); it != feat_rows.end())
      for (const auto& f : rule_features()) h.features.emplace(f, it->second->values[*table.column(f)]);
    evidence.push_back(std::move(h));
  }
  auto decisions = with_context(a.predictions, [&] { return triage(evidence, lists, rules, jobs); });

  fs::create_directories(dir);
  {
    auto out = open_output(dir / "decisions.csv");
    write_decisions(out, decisions);
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& d : decisions) ++counts[to_string(d.outcome)];
  save_json_file((dir / "triage.json").string(),
                 {{"lists", list_info},
                  {"rules", cfg.enabled},
                  {"threshold", cfg.threshold},
                  {"min_devices", cfg.min_devices},
                  {"min_periodicity", cfg.min_periodicity},
                  {"outcomes", counts}});
  log("triaged " + std::to_string(decisions.size()) + " hosts, " + std::to_string(counts["candidate"]) +
      " candidate(s)");
  return decisions;
}

inline void run_triage(const Common& c, const TriageArgs& a) {
  auto manifest = start_manifest("triage", c.seed, c.jobs);
  manifest["config"] = {{"triage_config", a.triage_config}};
  record_input(manifest, a.predictions);
  if (!a.features.empty()) record_input(manifest, a.features);
  for (const auto* v : {&a.deny, &a.allow, &a.cdn, &a.sinkhole})
    for (const auto& p : *v) record_input(manifest, p);
  StagedOutput out(c.out);
  triage_into(a, c.jobs, out.staging());
  out.commit(manifest);
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineArgs {
  GenerateArgs scenario;
  int folds = 10;
  std::size_t bootstrap = 1000;
  double threshold = 0.5;
  int repeats = 5;
  bool ablate = false;
};

/// Trains on one generated day and evaluates, predicts and triages on a
/// second scenario drawn for the following day.
inline void run_pipeline(const Common& c, const PipelineArgs& a) {
  auto manifest = start_manifest("pipeline", c.seed, c.jobs);
  manifest["config"] = {{"preset", a.scenario.preset}, {"scenario", a.scenario.scenario}, {"folds", a.folds},
                        {"bootstrap", a.bootstrap}, {"threshold", a.threshold}, {"repeats", a.repeats},
                        {"ablate_distributional", a.ablate}};
  if (!a.scenario.scenario.empty()) record_input(manifest, a.scenario.scenario);
  StagedOutput out(c.out);
  const auto& root = out.staging();

  auto train_cfg = scenario_for(a.scenario, derive_seed(c.seed, {1}));
  auto test_cfg = scenario_for(a.scenario, derive_seed(c.seed, {2}));
  test_cfg.day = train_cfg.day.next();
  write_scenario(generate(train_cfg, c.jobs), root / "data" / "train");
  write_scenario(generate(test_cfg, c.jobs), root / "data" / "test");
  log("generated training and test days");

  for (const char* part : {"train", "test"}) {
    FeaturizeArgs f;
    f.flows = {(root / "data" / part / "flows.csv").string()};
    f.internal_space = kSynthInternalSpace;
    f.labels = (root / "data" / part / "labels.csv").string();
    featurize_into(f, c.jobs, root / "features" / part);
  }

  TrainArgs t;
  t.features = (root / "features" / "train" / "features.csv").string();
  t.folds = a.folds;
  t.ablate = a.ablate;
  train_into(t, derive_seed(c.seed, {3}), c.jobs, root / "models");

  EvaluateArgs e;
  e.model_dir = (root / "models").string();
  e.features = (root / "features" / "test" / "features.csv").string();
  e.bootstrap = a.bootstrap;
  e.threshold = a.threshold;
  e.repeats = a.repeats;
  evaluate_into(e, derive_seed(c.seed, {4}), c.jobs, root / "evaluation");

  PredictArgs p;
  p.model_dir = e.model_dir;
  p.features = e.features;
  predict_into(p, root / "predictions");

  TriageArgs tr;
  tr.predictions = (root / "predictions" / "predictions.csv").string();
  tr.features = e.features;
  tr.threshold = a.threshold;
  triage_into(tr, c.jobs, root / "triage");

  out.commit(manifest);
  log("pipeline outputs in " + out.target().string());
}

}  // namespace c2flow::tool
