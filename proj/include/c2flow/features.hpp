#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "c2flow/aggregate.hpp"
#include "c2flow/common.hpp"

namespace c2flow {

struct FeatureConfig {
  int n_quantiles = 20;
  std::vector<std::uint16_t> tracked_ports = {21,  22,  23,  25,  53,  80,   110,  123,
                                              143, 443, 445, 587, 993, 995, 3389, 8080};
  double beacon_tolerance = 0.1;

  /// Guard used wherever a duration or gap sits in a denominator (seconds).
  static constexpr double kEpsilon = 1e-3;

  void validate() const {
    if (n_quantiles < 1) throw InvalidArgument("n_quantiles must be >= 1");
    if (beacon_tolerance < 0) throw InvalidArgument("beacon_tolerance must be >= 0");
    std::set<std::uint16_t> seen(tracked_ports.begin(), tracked_ports.end());
    if (seen.size() != tracked_ports.size()) throw InvalidArgument("tracked_ports must be distinct");
  }

  /// Levels 1/n, 2/n, ..., 1.
  std::vector<double> quantile_levels() const {
    std::vector<double> levels(static_cast<std::size_t>(n_quantiles));
    for (int i = 1; i <= n_quantiles; ++i)
      levels[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) / n_quantiles;
    return levels;
  }

  std::size_t flow_size_width() const { return 9 + tracked_ports.size() + 1; }
  static constexpr std::size_t beaconing_width() { return 5; }
  std::size_t distributional_width() const { return 3 * (2 + static_cast<std::size_t>(n_quantiles)); }
  std::size_t width() const { return flow_size_width() + beaconing_width() + distributional_width(); }

  /// Keys: n_quantiles, tracked_ports (comma list), beacon_tolerance.
  static FeatureConfig load(const std::string& path) {
    const auto kv = load_key_values(path);
    FeatureConfig cfg;
    for (const auto& [k, v] : kv)
      if (k != "n_quantiles" && k != "tracked_ports" && k != "beacon_tolerance")
        throw FormatError(path + ": unknown feature config key '" + k + "'");
    cfg.n_quantiles = static_cast<int>(kv_int(kv, "n_quantiles", cfg.n_quantiles, path));
    cfg.beacon_tolerance = kv_double(kv, "beacon_tolerance", cfg.beacon_tolerance, path);
    if (auto it = kv.find("tracked_ports"); it != kv.end()) {
      cfg.tracked_ports.clear();
      for (auto p : split(it->second, ',')) {
        if (trim(p).empty()) continue;
        unsigned port = 0;
        if (!parse_number(p, port) || port > 65535)
          throw FormatError(path + ": invalid port '" + std::string(p) + "' in tracked_ports");
        cfg.tracked_ports.push_back(static_cast<std::uint16_t>(port));
      }
    }
    cfg.validate();
    return cfg;
  }
};

/// Half-open index range [begin, end) inside a feature vector.
struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const BlockRange&) const = default;
};

struct FeatureBlocks {
  BlockRange flow_size;
  BlockRange beaconing;
  BlockRange distributional;
  bool operator==(const FeatureBlocks&) const = default;
};

struct NamedValues {
  std::vector<std::string> names;
  std::vector<double> values;

  void add(std::string name, double v) {
    names.push_back(std::move(name));
    values.push_back(v);
  }
  void append(const NamedValues& o) {
    names.insert(names.end(), o.names.begin(), o.names.end());
    values.insert(values.end(), o.values.begin(), o.values.end());
  }
  double at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw InvalidArgument("no feature named '" + std::string(name) + "'");
  }
};

struct FeatureVector {
  IpAddress host_ip;
  CalendarDay window_date;
  std::vector<double> values;
  std::vector<std::string> names;
  FeatureBlocks blocks;

  double at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw InvalidArgument("no feature named '" + std::string(name) + "'");
  }
};

/// Per-flow packets, bytes and bytes-per-packet of one aggregate.
struct FlowVariableSample {
  std::vector<double> packets_per_flow;
  std::vector<double> bytes_per_flow;
  std::vector<double> bpp_ratio;

  static FlowVariableSample from(const HostAggregate& agg) {
    FlowVariableSample s;
    s.packets_per_flow.reserve(agg.flows.size());
    s.bytes_per_flow.reserve(agg.flows.size());
    s.bpp_ratio.reserve(agg.flows.size());
    for (const auto& f : agg.flows) {
      const auto b = static_cast<double>(f.bytes);
      const auto p = static_cast<double>(f.packets);
      s.packets_per_flow.push_back(p);
      s.bytes_per_flow.push_back(b);
      s.bpp_ratio.push_back(b / p);
    }
    return s;
  }
};

/// Nearest-rank quantiles: the q-quantile of m values is the element of
/// 1-based rank ceil(q * m) in sorted order. Every output is a sample element.
inline std::vector<double> quantile_transform(std::span<const double> values,
                                              std::span<const double> levels) {
  if (values.empty()) throw InvalidArgument("empty distribution");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double q : levels) {
    // q*m is often an integer in exact arithmetic (e.g. 0.7 * 100); the
    // slack keeps rounding error from pushing it to the next rank.
    auto rank = static_cast<long long>(std::ceil(q * m - 1e-9));
    rank = std::clamp<long long>(rank, 1, static_cast<long long>(sorted.size()));
    out.push_back(sorted[static_cast<std::size_t>(rank - 1)]);
  }
  return out;
}

inline std::string quantile_label(int i, int n) {
  const double pct = 100.0 * i / n;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9)
    std::snprintf(buf, sizeof buf, "q%d", static_cast<int>(std::round(pct)));
  else
    std::snprintf(buf, sizeof buf, "q%.2f", pct);
  return buf;
}

inline NamedValues flow_size_features(const HostAggregate& agg, const FeatureConfig& cfg) {
  if (agg.flows.empty()) throw InvalidArgument("flow_size_features: empty aggregate");
  double total_bytes = 0, total_packets = 0, total_duration = 0, bpp_sum = 0, host_init = 0;
  std::vector<double> port_counts(cfg.tracked_ports.size() + 1, 0.0);
  for (const auto& f : agg.flows) {
    total_bytes += static_cast<double>(f.bytes);
    total_packets += static_cast<double>(f.packets);
    total_duration += f.duration_seconds();
    bpp_sum += static_cast<double>(f.bytes) / static_cast<double>(f.packets);
    if (f.initiated_by_host) host_init += 1;
    auto it = std::find(cfg.tracked_ports.begin(), cfg.tracked_ports.end(), f.device_port);
    port_counts[static_cast<std::size_t>(it - cfg.tracked_ports.begin())] += 1;
  }
  const auto n = static_cast<double>(agg.flows.size());
  const double dur = std::max(total_duration, FeatureConfig::kEpsilon);

  NamedValues out;
  out.add("total_bytes", total_bytes);
  out.add("total_packets", total_packets);
  out.add("total_duration", total_duration);
  out.add("flow_count", n);
  out.add("device_count", static_cast<double>(agg.device_count));
  out.add("mean_bpp", bpp_sum / n);
  out.add("byte_rate", total_bytes / dur);
  out.add("packet_rate", total_packets / dur);
  out.add("host_initiated_fraction", host_init / n);
  for (std::size_t i = 0; i < cfg.tracked_ports.size(); ++i)
    out.add("port_" + std::to_string(cfg.tracked_ports[i]), port_counts[i] / n);
  out.add("port_other", port_counts.back() / n);
  return out;
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

/// Inter-arrival statistics over the start times of the (time-sorted) flows.
inline NamedValues beaconing_features(const HostAggregate& agg, const FeatureConfig& cfg) {
  if (agg.flows.empty()) throw InvalidArgument("beaconing_features: empty aggregate");
  double mean_gap = 0, sd_gap = 0, cv_gap = 0, periodicity = 0, sd_packets = 0;
  if (agg.flows.size() >= 2) {
    std::vector<double> gaps;
    gaps.reserve(agg.flows.size() - 1);
    for (std::size_t i = 1; i < agg.flows.size(); ++i)
      gaps.push_back(static_cast<double>(agg.flows[i].start_time - agg.flows[i - 1].start_time) /
                     1000.0);
    mean_gap = mean_of(gaps);
    sd_gap = sample_sd(gaps);
    cv_gap = sd_gap / std::max(mean_gap, FeatureConfig::kEpsilon);
    const double med = median_of(gaps);
    const double band = cfg.beacon_tolerance * med;
    const auto near = std::count_if(gaps.begin(), gaps.end(),
                                    [&](double g) { return std::abs(g - med) <= band; });
    periodicity = static_cast<double>(near) / static_cast<double>(gaps.size());

    std::vector<double> pkts;
    pkts.reserve(agg.flows.size());
    for (const auto& f : agg.flows) pkts.push_back(static_cast<double>(f.packets));
    sd_packets = sample_sd(pkts);
  }
  NamedValues out;
  out.add("mean_gap", mean_gap);
  out.add("sd_gap", sd_gap);
  out.add("cv_gap", cv_gap);
  out.add("periodicity_score", periodicity);
  out.add("sd_packets", sd_packets);
  return out;
}

/// [mean, sd, quantiles...] for packets, bytes and bytes-per-packet, in that order.
inline NamedValues distributional_features(const FlowVariableSample& sample, const FeatureConfig& cfg) {
  const auto levels = cfg.quantile_levels();
  NamedValues out;
  auto block = [&](const std::string& prefix, const std::vector<double>& v) {
    out.add(prefix + "_mean", mean_of(v));
    out.add(prefix + "_sd", sample_sd(v));
    const auto q = quantile_transform(v, levels);
    for (int i = 0; i < cfg.n_quantiles; ++i)
      out.add(prefix + "_" + quantile_label(i + 1, cfg.n_quantiles), q[static_cast<std::size_t>(i)]);
  };
  block("pkts", sample.packets_per_flow);
  block("bytes", sample.bytes_per_flow);
  block("bpp", sample.bpp_ratio);
  return out;
}

inline FeatureBlocks feature_blocks(const FeatureConfig& cfg) {
  FeatureBlocks b;
  b.flow_size = {0, cfg.flow_size_width()};
  b.beaconing = {b.flow_size.end, b.flow_size.end + FeatureConfig::beaconing_width()};
  b.distributional = {b.beaconing.end, b.beaconing.end + cfg.distributional_width()};
  return b;
}

inline FeatureVector build_feature_vector(const HostAggregate& agg, const FeatureConfig& cfg) {
  NamedValues all = flow_size_features(agg, cfg);
  all.append(beaconing_features(agg, cfg));
  all.append(distributional_features(FlowVariableSample::from(agg), cfg));

  FeatureVector fv;
  fv.host_ip = agg.host_ip;
  fv.window_date = agg.window_date;
  fv.values = std::move(all.values);
  fv.names = std::move(all.names);
  fv.blocks = feature_blocks(cfg);
  for (std::size_t i = 0; i < fv.values.size(); ++i)
    if (!std::isfinite(fv.values[i]))
      throw Error("non-finite feature '" + fv.names[i] + "' for host " + agg.host_ip.to_string());
  return fv;
}

/// Feature names for `cfg` without computing any values.
inline std::vector<std::string> feature_names(const FeatureConfig& cfg) {
  HostAggregate probe;
  DirectedFlow f;
  f.bytes = f.packets = 1;
  probe.flows.push_back(f);
  probe.device_count = 1;
  return build_feature_vector(probe, cfg).names;
}

}  // namespace c2flow
