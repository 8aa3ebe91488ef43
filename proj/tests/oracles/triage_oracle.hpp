#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

struct V4Block {
  std::uint32_t net;
  int len;
};

/// Linear scan over every entry with explicit masks.
inline bool scan_contains(const std::vector<V4Block>& list, std::uint32_t a) {
  for (const auto& b : list) {
    const std::uint32_t mask = b.len == 0 ? 0u : ~std::uint32_t{0} << (32 - b.len);
    if ((a & mask) == (b.net & mask)) return true;
  }
  return false;
}

struct Host {
  std::uint32_t ip;
  double score;
  double devices;
  double periodicity;
};

/// Funnel written out as a plain if-chain: deny, allow, cdn, sinkhole, then
/// every rule must pass.
inline std::string reference_outcome(const Host& h, const std::vector<V4Block>& deny,
                                     const std::vector<V4Block>& allow, const std::vector<V4Block>& cdn,
                                     const std::vector<V4Block>& sinkhole, double threshold, double min_devices,
                                     double min_periodicity) {
  if (scan_contains(deny, h.ip)) return "known_malicious";
  if (scan_contains(allow, h.ip)) return "suppressed_allowlist";
  if (scan_contains(cdn, h.ip)) return "suppressed_cdn";
  if (scan_contains(sinkhole, h.ip)) return "suppressed_sinkhole";
  if (h.score >= threshold && h.devices >= min_devices && h.periodicity >= min_periodicity) return "candidate";
  return "dismissed";
}

}  // namespace oracle
