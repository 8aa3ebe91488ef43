// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance [--work-dir DIR] [--jobs N] [--only 1,2,...]

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "../oracles/auc_oracle.hpp"
#include "../oracles/quantile_oracle.hpp"
#include "../oracles/stump_oracle.hpp"
#include "c2flow/c2flow.hpp"

namespace fs = std::filesystem;
using namespace c2flow;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path work = fs::temp_directory_path() / "c2flow-acceptance";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::set<int> only;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

/// Runs one `c2flow pipeline` and returns its wall time in seconds.
double run_pipeline(const Settings& s, const std::string& name, const std::string& extra) {
  const auto out = s.work / name;
  fs::remove_all(out);
  const auto log = s.work / (name + ".log");
  const std::string cmd = std::string(C2FLOW_CLI) + " pipeline --seed 7 --jobs " + std::to_string(s.jobs) + " " +
                          extra + " --out " + out.string() + " > " + log.string() + " 2>&1";
  const auto t0 = Clock::now();
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) throw Error("pipeline " + name + " failed; see " + log.string());
  return secs;
}

/// Pipeline runs shared by several criteria, each started on first use.
class Runs {
 public:
  explicit Runs(const Settings& s) : s_(s) {}

  const fs::path& get(const std::string& name, const std::string& extra) {
    if (!done_.contains(name)) {
      seconds_[name] = run_pipeline(s_, name, extra);
      done_.insert(name);
      paths_[name] = s_.work / name;
    }
    return paths_[name];
  }
  double seconds(const std::string& name) const { return seconds_.at(name); }

 private:
  const Settings& s_;
  std::set<std::string> done_;
  std::map<std::string, fs::path> paths_;
  std::map<std::string, double> seconds_;
};

LabeledDataset gaussian_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto rng = make_rng(seed, {});
  LabeledDataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = standard_normal(rng);
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      if (j < 2) z += (j ? -1.5 : 1.5) * v;
    }
    ds.y.push_back(i < 2 ? static_cast<int>(i) : (uniform01(rng) < sigmoid(z) ? 1 : 0));
    ds.row_keys.push_back({IpAddress::v4(static_cast<std::uint32_t>(i)), CalendarDay(0)});
  }
  return ds;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(X(i, j));
  return out;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome auc_oracle_equivalence() {
  const auto t0 = Clock::now();
  auto rng = make_rng(1, {});
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::size_t levels = 2 + uniform_index(rng, 30);  // coarse grids force ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, levels)) / static_cast<double>(levels);
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(uniform_index(rng, 2));
    }
    shuffle(s, rng);
    if (auc(s, y) != oracle::pairwise_auc(s, y)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          "100 sets, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 3) + " s (limit 5 s)"};
}

Outcome quantile_oracle_equivalence() {
  const auto t0 = Clock::now();
  auto rng = make_rng(2, {});
  const FeatureConfig cfg;
  const auto levels = cfg.quantile_levels();
  int mismatches = 0, invariant_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 500);
    std::vector<double> v(n);
    for (auto& x : v) x = t % 3 == 0 ? static_cast<double>(uniform_index(rng, 10)) : std::exp(standard_normal(rng));
    const auto q = quantile_transform(v, levels);
    if (q != oracle::nearest_rank(v, cfg.n_quantiles)) ++mismatches;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (i && q[i] < q[i - 1]) ++invariant_failures;
      if (std::find(v.begin(), v.end(), q[i]) == v.end()) ++invariant_failures;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && invariant_failures == 0 && secs < 10.0,
          "1000 samples, " + std::to_string(mismatches) + " mismatches, " + std::to_string(invariant_failures) +
              " invariant failures, " + fmt(secs, 3) + " s (limit 10 s)"};
}

Outcome learner_correctness() {
  std::vector<std::string> failed;

  // GLM recovery
  auto rng = make_rng(3, {});
  Eigen::MatrixXd X(10000, 2);
  std::vector<int> y(10000);
  for (int i = 0; i < 10000; ++i) {
    X(i, 0) = standard_normal(rng);
    X(i, 1) = standard_normal(rng);
    y[static_cast<std::size_t>(i)] = uniform01(rng) < sigmoid(X(i, 0) - 2 * X(i, 1)) ? 1 : 0;
  }
  const auto [glm, info] = fit_glm(X, y);
  const auto beta = glm.raw_coefficients().second;
  const bool glm_ok = std::abs(beta(0) - 1) <= 0.1 && std::abs(beta(1) + 2) <= 0.1;
  if (!glm_ok) failed.push_back("glm");

  // lasso at and above lambda_max
  const auto ds = gaussian_dataset(500, 10, 4);
  const auto Z = Standardizer::fit(ds.X, false).apply(ds.X);
  const double lmax = lasso_lambda_max(Z, ds.y);
  int active = 0;
  for (const auto& [b0, b] : lasso_path_standardized(Z, ds.y, {4 * lmax, 2 * lmax, lmax}, LassoParams{}))
    for (Eigen::Index j = 0; j < b.size(); ++j) active += b(j) != 0.0;
  if (active != 0) failed.push_back("lasso");

  // gbm descent
  int rises = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto d = gaussian_dataset(300, 5, 10 + s);
    BoostParams p;
    p.trees = 50;
    p.learning_rate = 0.05;
    const auto m = fit_gbm(d.X, d.y, p, s);
    for (std::size_t t = 1; t < m.train_loss.size(); ++t) rises += m.train_loss[t] > m.train_loss[t - 1];
  }
  if (rises) failed.push_back("gbm");

  // gbm2 stump against exhaustive gain search
  int split_mismatch = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = gaussian_dataset(100, 5, 100 + s);
    BoostParams p;
    p.trees = 1;
    p.max_depth = 1;
    const auto m = fit_gbm2(d.X, d.y, p, s);
    const double pbar = static_cast<double>(d.positives()) / static_cast<double>(d.rows());
    std::vector<double> g, h;
    for (int v : d.y) {
      g.push_back(pbar - v);
      h.push_back(pbar * (1 - pbar));
    }
    const auto best = oracle::exhaustive_stump(rows_of(d.X), oracle::newton_gain(g, h, p.lambda, p.gamma));
    const auto& root = m.trees[0].nodes()[0];
    if (root.feature != best.feature || std::abs(root.threshold - best.threshold) > 1e-12) ++split_mismatch;
  }
  if (split_mismatch) failed.push_back("gbm2");

  std::string detail = "glm beta=(" + fmt(beta(0)) + ", " + fmt(beta(1)) + "); lasso active slopes at lambda>=lambda_max: " +
                       std::to_string(active) + "; gbm loss rises: " + std::to_string(rises) +
                       "; gbm2 split mismatches: " + std::to_string(split_mismatch) + "/20";
  if (!failed.empty()) detail += "; failed:" + [&] { std::string s; for (auto& f : failed) s += " " + f; return s; }();
  return {failed.empty(), detail};
}

Outcome synthetic_end_to_end(Runs& runs) {
  const auto dir = runs.get("default", "");
  const auto ev = read_json(dir / "evaluation" / "evaluation.json");
  double max_base = 0;
  std::string detail;
  bool ok = true;
  for (const char* k : {"rf", "pca_rf", "gbm", "gbm2", "glm", "lasso"}) {
    const double a = ev[k]["point_auc"].get<double>();
    max_base = std::max(max_base, a);
    detail += std::string(k) + "=" + fmt(a) + " ";
    if ((std::string(k) == "rf" || std::string(k) == "gbm" || std::string(k) == "gbm2") && a < 0.95) ok = false;
  }
  const double stack = ev["stack"]["point_auc"].get<double>();
  detail += "stack=" + fmt(stack);
  if (stack < max_base - 0.01) ok = false;
  const double secs = runs.seconds("default");
  if (secs >= 600) ok = false;
  return {ok, "held-out AUC " + detail + "; pipeline " + fmt(secs, 1) + " s (limit 600 s)"};
}

Outcome distributional_ablation(Runs& runs) {
  const auto full = read_json(runs.get("overlap", "--preset overlap") / "evaluation" / "evaluation.json");
  const auto abl = read_json(runs.get("overlap-ablated", "--preset overlap --ablate-distributional") / "evaluation" /
                             "evaluation.json");
  const double a = full["rf"]["mean_bootstrap_auc"].get<double>();
  const double b = abl["rf"]["mean_bootstrap_auc"].get<double>();
  std::string others;
  for (const char* k : {"pca_rf", "gbm", "gbm2", "glm", "lasso", "stack"})
    others += std::string(" ") + k + " " + fmt(full[k]["mean_bootstrap_auc"].get<double>(), 3) + "/" +
              fmt(abl[k]["mean_bootstrap_auc"].get<double>(), 3);
  return {a - b >= 0.03, "rf mean bootstrap AUC (B=" + std::to_string(full["rf"]["resamples"].get<int>()) + ") " +
                             fmt(a) + " vs ablated " + fmt(b) + ", gap " + fmt(a - b) + " (need >= 0.03); full/ablated:" +
                             others};
}

Outcome importance_sanity(Runs& runs) {
  const auto imp = read_json(runs.get("overlap", "--preset overlap") / "evaluation" / "importance.json");
  const auto& ranked = imp["rf"]["features"];
  int distributional = 0, tail = 0, quantiles = 0;
  std::string top;
  for (std::size_t r = 0; r < 20 && r < ranked.size(); ++r) {
    const auto n = ranked[r]["feature"].get<std::string>();
    if (ranked[r]["distributional"].get<bool>()) ++distributional;
    const auto q = n.rfind("_q");
    if (is_distributional_feature(n) && q != std::string::npos) {
      ++quantiles;
      const double level = std::stod(n.substr(q + 2));
      if (level < 25 || level > 75) ++tail;
    }
    if (r < 5) top += (r ? ", " : "") + n;
  }
  return {distributional >= 10, std::to_string(distributional) + "/20 of rf top-20 are distributional (need >= 10); " +
                                    "tail quantiles (outside q25-q75) " + std::to_string(tail) + " of " +
                                    std::to_string(quantiles) + " quantile features (reported only); top 5: " + top};
}

Outcome no_leakage_stacking() {
  const auto ds = gaussian_dataset(100, 4, 7);
  std::vector<BaseSpec> specs;
  for (auto k : kBaseKinds) {
    auto p = default_grid(k).front();
    if (p.contains("trees")) p["trees"] = 25;
    specs.push_back({k, p});
  }
  const auto fold = stratified_folds(ds.y, 10, 7);
  const auto base = oof_matrix(ds, specs, fold, 7, ArtifactFitter{});
  int influenced = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    auto probe = ds;
    probe.y[i] = 1 - probe.y[i];
    const auto flipped = oof_matrix(probe, specs, fold, 7, ArtifactFitter{});
    for (Eigen::Index m = 0; m < flipped.cols(); ++m)
      influenced += flipped(static_cast<Eigen::Index>(i), m) != base(static_cast<Eigen::Index>(i), m);
  }
  return {influenced == 0, "flipped each of 100 labels; OOF entries changed for the flipped row: " +
                               std::to_string(influenced) + " of 600"};
}

Outcome determinism(Runs& runs) {
  const auto a = read_json(runs.get("default", "") / "manifest.json");
  const auto b = read_json(runs.get("default-rerun", "") / "manifest.json");
  const auto& oa = a["outputs"];
  const auto& ob = b["outputs"];
  return {oa == ob && !oa.empty(), std::to_string(oa.size()) + " output checksums compared, " +
                                       (oa == ob ? "all identical" : "differences found")};
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) s.work = argv[++i];
    else if (a == "--jobs" && i + 1 < argc) s.jobs = std::stoi(argv[++i]);
    else if (a == "--only" && i + 1 < argc) {
      for (auto part : split(argv[++i], ',')) s.only.insert(std::stoi(std::string(part)));
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--jobs N] [--only 1,2,...]\n";
      return 2;
    }
  }
  fs::create_directories(s.work);
  Runs runs(s);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence: AUC", auc_oracle_equivalence},
      {"oracle equivalence: quantiles", quantile_oracle_equivalence},
      {"learner correctness", learner_correctness},
      {"synthetic end-to-end", [&] { return synthetic_end_to_end(runs); }},
      {"distributional-feature ablation", [&] { return distributional_ablation(runs); }},
      {"importance sanity", [&] { return importance_sanity(runs); }},
      {"no-leakage stacking", no_leakage_stacking},
      {"determinism", [&] { return determinism(runs); }},
  };

  std::cout << "acceptance: jobs=" << s.jobs << ", work dir " << s.work.string() << std::endl;
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c + 1);
    if (!s.only.empty() && !s.only.contains(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[c].first << ": " << o.detail << " ("
              << fmt(seconds_since(t0), 1) << " s)" << std::endl;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failures ? 1 : 0;
}
