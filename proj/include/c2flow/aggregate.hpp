#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/flow.hpp"
#include "c2flow/ip.hpp"

namespace c2flow {

/// Address blocks that hold the internal devices. Membership is any-match.
class InternalSpace {
 public:
  InternalSpace() = default;
  explicit InternalSpace(std::vector<Cidr> prefixes) : prefixes_(std::move(prefixes)) {
    if (prefixes_.empty()) throw InvalidArgument("internal space needs at least one prefix");
  }

  static InternalSpace parse(std::string_view spec) {
    std::vector<Cidr> out;
    for (auto part : split(spec, ',')) {
      auto c = Cidr::parse(part);
      if (!c) throw FormatError("invalid CIDR '" + std::string(part) + "'");
      out.push_back(*c);
    }
    return InternalSpace(std::move(out));
  }

  /// One CIDR per line; `#` starts a comment.
  static InternalSpace load(const std::string& path) {
    auto in = open_input(path);
    std::vector<Cidr> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = line;
      if (auto h = sv.find('#'); h != std::string_view::npos) sv = sv.substr(0, h);
      sv = trim(sv);
      if (sv.empty()) continue;
      auto c = Cidr::parse(sv);
      if (!c)
        throw FormatError(path + ":" + std::to_string(lineno) + ": invalid CIDR '" +
                          std::string(sv) + "'");
      out.push_back(*c);
    }
    if (out.empty()) throw FormatError(path + ": internal space lists no prefixes");
    return InternalSpace(std::move(out));
  }

  bool contains(const IpAddress& a) const {
    return std::any_of(prefixes_.begin(), prefixes_.end(),
                       [&](const Cidr& c) { return c.contains(a); });
  }

  const std::vector<Cidr>& prefixes() const { return prefixes_; }

 private:
  std::vector<Cidr> prefixes_;
};

/// A boundary flow re-expressed from the external host's point of view.
struct DirectedFlow {
  IpAddress host_ip;
  IpAddress device_ip;
  std::uint16_t host_port = 0;
  std::uint16_t device_port = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  EpochMillis start_time = 0;
  EpochMillis end_time = 0;
  bool initiated_by_host = false;

  double duration_seconds() const { return static_cast<double>(end_time - start_time) / 1000.0; }

  auto sort_key() const {
    return std::tie(start_time, device_ip, device_port, end_time, host_port, bytes, packets,
                    initiated_by_host);
  }
  bool operator==(const DirectedFlow&) const = default;
};

/// Returns the host-centric view of `r`, or nullopt when the record does not
/// cross the internal/external boundary.
inline std::optional<DirectedFlow> split_direction(const FlowRecord& r, const InternalSpace& space) {
  const bool src_in = space.contains(r.src_ip);
  const bool dst_in = space.contains(r.dst_ip);
  if (src_in == dst_in) return std::nullopt;
  DirectedFlow d;
  d.bytes = r.bytes;
  d.packets = r.packets;
  d.start_time = r.start_time;
  d.end_time = r.end_time;
  d.initiated_by_host = !src_in;
  if (d.initiated_by_host) {
    d.host_ip = r.src_ip;
    d.host_port = r.src_port;
    d.device_ip = r.dst_ip;
    d.device_port = r.dst_port;
  } else {
    d.host_ip = r.dst_ip;
    d.host_port = r.dst_port;
    d.device_ip = r.src_ip;
    d.device_port = r.src_port;
  }
  return d;
}

/// All boundary flows of one external host on one calendar day.
struct HostAggregate {
  IpAddress host_ip;
  CalendarDay window_date;
  std::vector<DirectedFlow> flows;  // ascending start_time, then device endpoint
  std::size_t device_count = 0;

  /// Restores the ordering and device_count invariants after flows change.
  void finalize() {
    std::sort(flows.begin(), flows.end(),
              [](const DirectedFlow& a, const DirectedFlow& b) { return a.sort_key() < b.sort_key(); });
    std::set<IpAddress> devices;
    for (const auto& f : flows) devices.insert(f.device_ip);
    device_count = devices.size();
  }

  bool operator==(const HostAggregate&) const = default;
};

struct HostDayKey {
  IpAddress host_ip;
  CalendarDay day;
  auto operator<=>(const HostDayKey&) const = default;
};

struct AggregationResult {
  std::map<IpAddress, HostAggregate> hosts;
  std::uint64_t non_boundary = 0;
  std::uint64_t outside_window = 0;
};

/// Groups the records of one day by external host. Records starting outside
/// `date` are counted in `outside_window` and left out.
inline AggregationResult build_aggregates(const std::vector<FlowRecord>& records,
                                          const InternalSpace& space, CalendarDay date) {
  AggregationResult out;
  for (const auto& r : records) {
    auto d = split_direction(r, space);
    if (!d) {
      ++out.non_boundary;
      continue;
    }
    if (!date.contains(d->start_time)) {
      ++out.outside_window;
      continue;
    }
    auto [it, inserted] = out.hosts.try_emplace(d->host_ip);
    if (inserted) {
      it->second.host_ip = d->host_ip;
      it->second.window_date = date;
    }
    it->second.flows.push_back(*d);
  }
  for (auto& [ip, agg] : out.hosts) agg.finalize();
  return out;
}

struct DailyAggregationResult {
  std::map<HostDayKey, HostAggregate> aggregates;
  std::uint64_t non_boundary = 0;
};

/// Multi-day variant: one aggregate per (host, start day).
inline DailyAggregationResult build_daily_aggregates(const std::vector<FlowRecord>& records,
                                                     const InternalSpace& space) {
  DailyAggregationResult out;
  for (const auto& r : records) {
    auto d = split_direction(r, space);
    if (!d) {
      ++out.non_boundary;
      continue;
    }
    const HostDayKey key{d->host_ip, CalendarDay::containing(d->start_time)};
    auto [it, inserted] = out.aggregates.try_emplace(key);
    if (inserted) {
      it->second.host_ip = key.host_ip;
      it->second.window_date = key.day;
    }
    it->second.flows.push_back(*d);
  }
  for (auto& [key, agg] : out.aggregates) agg.finalize();
  return out;
}

}  // namespace c2flow
