#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/ip.hpp"

namespace c2flow {

/// Milliseconds since the Unix epoch, UTC.
using EpochMillis = std::int64_t;

inline constexpr EpochMillis kMillisPerDay = 86'400'000;

/// A UTC calendar day, stored as days since 1970-01-01.
class CalendarDay {
 public:
  constexpr CalendarDay() = default;
  constexpr explicit CalendarDay(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static constexpr CalendarDay containing(EpochMillis t) {
    // floor division so pre-1970 timestamps land on the right day
    EpochMillis d = t / kMillisPerDay;
    if (t % kMillisPerDay < 0) --d;
    return CalendarDay(static_cast<std::int32_t>(d));
  }

  static std::optional<CalendarDay> parse(std::string_view text) {
    text = trim(text);
    int y = 0;
    unsigned m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), m) ||
        !parse_number(text.substr(8, 2), d))
      return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return CalendarDay(std::chrono::sys_days(ymd).time_since_epoch().count());
  }

  constexpr std::int32_t days_since_epoch() const { return days_; }
  constexpr EpochMillis start_millis() const { return EpochMillis{days_} * kMillisPerDay; }
  constexpr EpochMillis end_millis() const { return start_millis() + kMillisPerDay; }
  constexpr bool contains(EpochMillis t) const { return t >= start_millis() && t < end_millis(); }
  constexpr CalendarDay next() const { return CalendarDay(days_ + 1); }

  std::string to_string() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  constexpr auto operator<=>(const CalendarDay&) const = default;

 private:
  std::int32_t days_ = 0;
};

/// One NetFlow entry.
struct FlowRecord {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  EpochMillis start_time = 0;
  EpochMillis end_time = 0;
  std::uint8_t protocol = 0;
  std::string flags;

  bool operator==(const FlowRecord&) const = default;
};

/// Whether the IP protocol carries transport ports (TCP, UDP, DCCP, SCTP, UDP-Lite).
constexpr bool protocol_has_ports(std::uint8_t proto) {
  return proto == 6 || proto == 17 || proto == 33 || proto == 132 || proto == 136;
}

struct IngestStats {
  std::uint64_t lines_read = 0;
  std::uint64_t records_accepted = 0;
  std::uint64_t records_rejected = 0;
  std::map<std::string, std::uint64_t> reject_reasons;

  IngestStats& operator+=(const IngestStats& o) {
    lines_read += o.lines_read;
    records_accepted += o.records_accepted;
    records_rejected += o.records_rejected;
    for (const auto& [k, v] : o.reject_reasons) reject_reasons[k] += v;
    return *this;
  }
  bool operator==(const IngestStats&) const = default;
};

namespace reject {
inline constexpr const char* kFieldCount = "field-count";
inline constexpr const char* kAddress = "bad-address";
inline constexpr const char* kPort = "bad-port";
inline constexpr const char* kBytes = "bad-bytes";
inline constexpr const char* kPackets = "bad-packets";
inline constexpr const char* kTimestamp = "bad-timestamp";
inline constexpr const char* kProtocol = "bad-protocol";
inline constexpr const char* kTimeOrder = "time-order";
inline constexpr const char* kBytesBelowPackets = "bytes-below-packets";
}  // namespace reject

/// Canonical field names, in the column order used when writing flow files.
inline constexpr std::array<const char*, 10> kFlowFields = {
    "src_ip", "dst_ip",     "src_port", "dst_port", "bytes",
    "packets", "start_time", "end_time", "protocol", "flags"};

/// Maps each canonical field to the header of the column that holds it.
struct FlowSchema {
  std::array<std::string, 10> columns;

  static FlowSchema canonical() {
    FlowSchema s;
    for (std::size_t i = 0; i < kFlowFields.size(); ++i) s.columns[i] = kFlowFields[i];
    return s;
  }

  /// Loads a `field = column header` file. Unlisted fields keep their canonical name.
  static FlowSchema load(const std::string& path) {
    auto kv = load_key_values(path);
    FlowSchema s = canonical();
    for (const auto& [key, value] : kv) {
      auto it = std::find_if(kFlowFields.begin(), kFlowFields.end(),
                             [&](const char* f) { return key == f; });
      if (it == kFlowFields.end())
        throw FormatError(path + ": unknown flow field '" + key + "'");
      s.columns[static_cast<std::size_t>(it - kFlowFields.begin())] = value;
    }
    return s;
  }
};

struct ParsedFlows {
  std::vector<FlowRecord> records;
  IngestStats stats;
};

namespace detail {

enum FieldIndex { kSrcIp, kDstIp, kSrcPort, kDstPort, kBytesF, kPacketsF, kStart, kEnd, kProto, kFlags };

/// Returns nullptr on success, otherwise the rejection reason.
inline const char* parse_flow_row(const std::vector<std::string_view>& cells,
                                  const std::array<std::size_t, 10>& col, FlowRecord& r) {
  auto src = IpAddress::parse(cells[col[kSrcIp]]);
  auto dst = IpAddress::parse(cells[col[kDstIp]]);
  if (!src || !dst) return reject::kAddress;
  r.src_ip = *src;
  r.dst_ip = *dst;

  unsigned sport = 0, dport = 0;
  if (!parse_number(cells[col[kSrcPort]], sport) || !parse_number(cells[col[kDstPort]], dport) ||
      sport > 65535 || dport > 65535)
    return reject::kPort;

  if (!parse_number(cells[col[kBytesF]], r.bytes)) return reject::kBytes;
  if (!parse_number(cells[col[kPacketsF]], r.packets) || r.packets == 0) return reject::kPackets;
  if (!parse_number(cells[col[kStart]], r.start_time) || !parse_number(cells[col[kEnd]], r.end_time))
    return reject::kTimestamp;

  unsigned proto = 0;
  if (!parse_number(cells[col[kProto]], proto) || proto > 255) return reject::kProtocol;
  r.protocol = static_cast<std::uint8_t>(proto);

  if (r.end_time < r.start_time) return reject::kTimeOrder;
  if (r.bytes < r.packets) return reject::kBytesBelowPackets;

  // Portless protocols (ICMP etc.) often smuggle type/code into the port
  // columns; those values are not ports.
  if (protocol_has_ports(r.protocol)) {
    r.src_port = static_cast<std::uint16_t>(sport);
    r.dst_port = static_cast<std::uint16_t>(dport);
  } else {
    r.src_port = r.dst_port = 0;
  }
  r.flags = std::string(trim(cells[col[kFlags]]));
  return nullptr;
}

}  // namespace detail

/// Parses delimited flow text. The delimiter is tab when the header contains
/// one, comma otherwise. Blank lines carry no row and are skipped.
inline ParsedFlows parse_flow_stream(std::istream& in, const FlowSchema& schema,
                                     const std::string& origin = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw FormatError(origin + ": missing header row");
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto head = split(trim(header), delim);

  std::array<std::size_t, 10> col{};
  for (std::size_t f = 0; f < kFlowFields.size(); ++f) {
    auto it = std::find_if(head.begin(), head.end(),
                           [&](std::string_view h) { return trim(h) == schema.columns[f]; });
    if (it == head.end())
      throw FormatError(origin + ": header has no column '" + schema.columns[f] +
                        "' (mapped from field '" + kFlowFields[f] + "')");
    col[f] = static_cast<std::size_t>(it - head.begin());
  }

  ParsedFlows out;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view sv = line;
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (trim(sv).empty()) continue;
    ++out.stats.lines_read;
    const auto cells = split(sv, delim);
    FlowRecord r;
    const char* reason =
        cells.size() != head.size() ? reject::kFieldCount : detail::parse_flow_row(cells, col, r);
    if (reason) {
      ++out.stats.records_rejected;
      ++out.stats.reject_reasons[reason];
    } else {
      ++out.stats.records_accepted;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

inline ParsedFlows parse_flow_file(const std::string& path,
                                   const FlowSchema& schema = FlowSchema::canonical()) {
  auto in = open_input(path);
  return parse_flow_stream(in, schema, path);
}

inline std::string flow_header(char delim = ',') {
  std::string s;
  for (std::size_t i = 0; i < kFlowFields.size(); ++i) {
    if (i) s += delim;
    s += kFlowFields[i];
  }
  return s;
}

/// Formats a record in canonical column order.
inline std::string format_flow_row(const FlowRecord& r, char delim = ',') {
  std::string s;
  s.reserve(96);
  auto add = [&](const std::string& v) {
    if (!s.empty()) s += delim;
    s += v;
  };
  add(r.src_ip.to_string());
  add(r.dst_ip.to_string());
  add(std::to_string(r.src_port));
  add(std::to_string(r.dst_port));
  add(std::to_string(r.bytes));
  add(std::to_string(r.packets));
  add(std::to_string(r.start_time));
  add(std::to_string(r.end_time));
  add(std::to_string(r.protocol));
  s += delim;
  s += r.flags;
  return s;
}

inline void write_flows(std::ostream& out, const std::vector<FlowRecord>& records, char delim = ',') {
  out << flow_header(delim) << '\n';
  for (const auto& r : records) out << format_flow_row(r, delim) << '\n';
}

}  // namespace c2flow
