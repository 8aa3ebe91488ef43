#pragma once

#include <arpa/inet.h>

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

/// Minimal validator for canonical comma-separated flow rows: true when the
/// row would yield a valid record.
inline bool valid_flow_line(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.push_back("");
  if (f.size() != 10) return false;
  unsigned char buf[16];
  for (int i : {0, 1})
    if (inet_pton(AF_INET, f[i].c_str(), buf) != 1 && inet_pton(AF_INET6, f[i].c_str(), buf) != 1) return false;
  auto all_digits = [](const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  };
  for (int i : {2, 3, 4, 5, 8})
    if (!all_digits(f[i])) return false;
  for (int i : {6, 7})
    if (!all_digits(f[i]) && !(f[i].size() > 1 && f[i][0] == '-' && all_digits(f[i].substr(1)))) return false;
  const auto sport = std::stoull(f[2]), dport = std::stoull(f[3]);
  const auto bytes = std::stoull(f[4]), pkts = std::stoull(f[5]);
  const auto start = std::stoll(f[6]), end = std::stoll(f[7]);
  const auto proto = std::stoull(f[8]);
  if (sport > 65535 || dport > 65535 || proto > 255) return false;
  if (pkts < 1 || bytes < pkts) return false;
  if (end < start) return false;
  return true;
}

struct HostTotals {
  std::size_t flows = 0;
  unsigned long long bytes = 0;
  unsigned long long packets = 0;
};

/// One-pass hash count keyed by the endpoint outside 10.0.0.0/8. Rows with
/// both or neither endpoint internal are skipped.
inline std::map<std::string, HostTotals> group_by_external(const std::vector<std::string>& rows) {
  std::map<std::string, HostTotals> out;
  for (const auto& line : rows) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const bool src_in = f[0].rfind("10.", 0) == 0, dst_in = f[1].rfind("10.", 0) == 0;
    if (src_in == dst_in) continue;
    auto& t = out[src_in ? f[1] : f[0]];
    ++t.flows;
    t.bytes += std::stoull(f[4]);
    t.packets += std::stoull(f[5]);
  }
  return out;
}

/// Gaps within +-tol*median of the median, counted one by one.
inline double gap_counter(std::vector<double> starts, double tol) {
  std::sort(starts.begin(), starts.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < starts.size(); ++i) gaps.push_back(starts[i] - starts[i - 1]);
  if (gaps.empty()) return 0.0;
  std::vector<double> s = gaps;
  std::sort(s.begin(), s.end());
  const double med = s.size() % 2 ? s[s.size() / 2] : (s[s.size() / 2 - 1] + s[s.size() / 2]) / 2;
  int hits = 0;
  for (double g : gaps)
    if (g >= med - tol * med && g <= med + tol * med) ++hits;
  return static_cast<double>(hits) / gaps.size();
}

}  // namespace oracle
