#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/features.hpp"

namespace c2flow {

// ---------------------------------------------------------------------------
// Feature matrix files
// ---------------------------------------------------------------------------

struct FeatureRow {
  IpAddress host_ip;
  CalendarDay window_date;
  std::optional<int> label;
  std::vector<double> values;
};

/// One row per (host, day): `host_ip,window_date,label,<feature names...>`.
/// The label cell is empty when unknown.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<FeatureRow> rows;

  static FeatureTable from_vectors(const std::vector<FeatureVector>& fvs) {
    FeatureTable t;
    for (const auto& fv : fvs) {
      if (t.names.empty()) t.names = fv.names;
      t.rows.push_back({fv.host_ip, fv.window_date, std::nullopt, fv.values});
    }
    return t;
  }

  /// One row per (host, day) aggregate, in (host, day) order.
  static FeatureTable featurize(const std::vector<FlowRecord>& records, const InternalSpace& space,
                                const FeatureConfig& cfg, int jobs = 1) {
    const auto daily = build_daily_aggregates(records, space);
    std::vector<const HostAggregate*> aggs;
    for (const auto& [key, agg] : daily.aggregates) aggs.push_back(&agg);
    std::vector<FeatureVector> fvs(aggs.size());
    parallel_for(aggs.size(), jobs, [&](std::size_t i) { fvs[i] = build_feature_vector(*aggs[i], cfg); });
    FeatureTable t = from_vectors(fvs);
    t.names = feature_names(cfg);
    return t;
  }

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  void write(std::ostream& out) const {
    out << "host_ip,window_date,label";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
      out << r.host_ip.to_string() << ',' << r.window_date.to_string() << ',';
      if (r.label) out << *r.label;
      for (double v : r.values) out << ',' << format_double(v);
      out << '\n';
    }
  }

  static FeatureTable read(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(origin + ": missing header row");
    auto head = split(trim(line), ',');
    if (head.size() < 3 || trim(head[0]) != "host_ip" || trim(head[1]) != "window_date" ||
        trim(head[2]) != "label")
      throw FormatError(origin + ": header must start with host_ip,window_date,label");
    FeatureTable t;
    for (std::size_t i = 3; i < head.size(); ++i) t.names.emplace_back(trim(head[i]));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const auto cells = split(trim(line), ',');
      const std::string where = origin + ":" + std::to_string(lineno);
      if (cells.size() != head.size())
        throw FormatError(where + ": expected " + std::to_string(head.size()) + " cells, got " +
                          std::to_string(cells.size()));
      FeatureRow r;
      auto ip = IpAddress::parse(cells[0]);
      auto day = CalendarDay::parse(cells[1]);
      if (!ip) throw FormatError(where + ": invalid host_ip '" + std::string(cells[0]) + "'");
      if (!day) throw FormatError(where + ": invalid window_date '" + std::string(cells[1]) + "'");
      r.host_ip = *ip;
      r.window_date = *day;
      if (!trim(cells[2]).empty()) {
        int lab = 0;
        if (!parse_number(cells[2], lab) || (lab != 0 && lab != 1))
          throw FormatError(where + ": label must be 0, 1 or empty");
        r.label = lab;
      }
      r.values.resize(t.names.size());
      for (std::size_t j = 0; j < t.names.size(); ++j) {
        double v = 0;
        if (!parse_number(cells[j + 3], v) || !std::isfinite(v))
          throw FormatError(where + ": column '" + t.names[j] + "' is not a finite number");
        r.values[j] = v;
      }
      t.rows.push_back(std::move(r));
    }
    return t;
  }

  static FeatureTable load(const std::string& path) {
    auto in = open_input(path);
    return read(in, path);
  }
};

/// `host_ip,label` file. Labels: malicious/1 and benign/unknown/0.
inline std::map<IpAddress, int> load_labels(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
  std::map<IpAddress, int> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 2) throw FormatError(where + ": expected host_ip,label");
    auto ip = IpAddress::parse(cells[0]);
    if (!ip) throw FormatError(where + ": invalid host_ip '" + std::string(cells[0]) + "'");
    const auto lab = trim(cells[1]);
    if (lab == "malicious" || lab == "1")
      out[*ip] = 1;
    else if (lab == "benign" || lab == "unknown" || lab == "0")
      out[*ip] = 0;
    else
      throw FormatError(where + ": unknown label '" + std::string(lab) + "'");
  }
  return out;
}

inline void write_labels(std::ostream& out, const std::map<IpAddress, int>& labels) {
  out << "host_ip,label\n";
  for (const auto& [ip, y] : labels) out << ip.to_string() << ',' << (y ? "malicious" : "benign") << '\n';
}

inline void apply_labels(FeatureTable& t, const std::map<IpAddress, int>& labels) {
  for (auto& r : t.rows) {
    auto it = labels.find(r.host_ip);
    r.label = it == labels.end() ? std::nullopt : std::optional<int>(it->second);
  }
}

/// True for columns of the packets/bytes/bytes-per-packet distribution blocks.
inline bool is_distributional_feature(std::string_view name) {
  return name.starts_with("pkts_") || name.starts_with("bytes_") || name.starts_with("bpp_");
}

// ---------------------------------------------------------------------------
// Labeled datasets
// ---------------------------------------------------------------------------

struct LabeledDataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<std::string> feature_names;
  std::vector<HostDayKey> row_keys;

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return feature_names.size(); }

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  }

  void validate(bool require_both_classes = true) const {
    if (static_cast<std::size_t>(X.rows()) != y.size() || row_keys.size() != y.size())
      throw InvalidArgument("dataset: X, y and row_keys disagree in length");
    if (static_cast<std::size_t>(X.cols()) != feature_names.size())
      throw InvalidArgument("dataset: X columns and feature names disagree");
    if (!X.allFinite()) throw InvalidArgument("dataset: X contains non-finite values");
    for (int v : y)
      if (v != 0 && v != 1) throw InvalidArgument("dataset: labels must be 0 or 1");
    if (require_both_classes) {
      const auto p = positives();
      if (p == 0 || p == y.size()) throw InvalidArgument("dataset: both classes must be present");
    }
  }

  /// Labeled rows of `t`; unlabeled rows are skipped.
  static LabeledDataset from_table(const FeatureTable& t) {
    LabeledDataset d;
    d.feature_names = t.names;
    std::vector<const FeatureRow*> kept;
    for (const auto& r : t.rows)
      if (r.label) kept.push_back(&r);
    d.X.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(t.names.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = 0; j < t.names.size(); ++j)
        d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kept[i]->values[j];
      d.y.push_back(*kept[i]->label);
      d.row_keys.push_back({kept[i]->host_ip, kept[i]->window_date});
    }
    return d;
  }

  LabeledDataset subset(const std::vector<std::size_t>& rows_idx) const {
    LabeledDataset d;
    d.feature_names = feature_names;
    d.X.resize(static_cast<Eigen::Index>(rows_idx.size()), X.cols());
    for (std::size_t i = 0; i < rows_idx.size(); ++i) {
      d.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows_idx[i]));
      d.y.push_back(y[rows_idx[i]]);
      d.row_keys.push_back(row_keys[rows_idx[i]]);
    }
    return d;
  }

  LabeledDataset select_columns(const std::vector<std::string>& names) const {
    LabeledDataset d;
    d.feature_names = names;
    d.y = y;
    d.row_keys = row_keys;
    d.X.resize(X.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      auto it = std::find(feature_names.begin(), feature_names.end(), names[j]);
      if (it == feature_names.end()) throw InvalidArgument("dataset has no column '" + names[j] + "'");
      d.X.col(static_cast<Eigen::Index>(j)) = X.col(it - feature_names.begin());
    }
    return d;
  }

  /// Drops the distributional block (packets/bytes/bpp mean, sd and quantiles).
  LabeledDataset without_distributional() const {
    std::vector<std::string> keep;
    for (const auto& n : feature_names)
      if (!is_distributional_feature(n)) keep.push_back(n);
    return select_columns(keep);
  }
};

/// Stratified fold ids in [0, k). Each class is shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes differ by at most one.
/// Every training part keeps both classes as long as each class has >= 2 rows.
inline std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("stratified_folds: need k >= 2");
  if (static_cast<std::size_t>(k) > y.size())
    throw InvalidArgument("stratified_folds: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(y.size()) + " rows");
  std::vector<int> fold(y.size(), 0);
  std::size_t deal = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    if (idx.size() < 2)
      throw InvalidArgument("stratified_folds: class " + std::to_string(cls) + " has " +
                            std::to_string(idx.size()) + " rows, need at least 2");
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(cls)});
    shuffle(idx, rng);
    for (auto i : idx) fold[i] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
  }
  return fold;
}

inline std::vector<std::size_t> rows_where(const std::vector<int>& fold, int f, bool equal) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == f) == equal) out.push_back(i);
  return out;
}

/// Keeps every malicious row and at most `negatives_per_day` sampled
/// benign/unknown rows per window date.
inline LabeledDataset rebalance(const LabeledDataset& d, std::size_t negatives_per_day,
                                std::uint64_t seed) {
  std::map<CalendarDay, std::vector<std::size_t>> neg_by_day;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (d.y[i] == 1)
      keep.push_back(i);
    else
      neg_by_day[d.row_keys[i].day].push_back(i);
  }
  for (auto& [day, idx] : neg_by_day) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(static_cast<std::uint32_t>(day.days_since_epoch()))});
    shuffle(idx, rng);
    if (idx.size() > negatives_per_day) idx.resize(negatives_per_day);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return d.subset(keep);
}

}  // namespace c2flow
