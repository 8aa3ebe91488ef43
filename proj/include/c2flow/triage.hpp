#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/dataset.hpp"
#include "c2flow/flow.hpp"
#include "c2flow/ip.hpp"

namespace c2flow {

enum class ListKind { deny, allow, cdn_cloud, sinkhole };

inline std::string to_string(ListKind k) {
  switch (k) {
    case ListKind::deny: return "deny";
    case ListKind::allow: return "allow";
    case ListKind::cdn_cloud: return "cdn_cloud";
    case ListKind::sinkhole: return "sinkhole";
  }
  return "?";
}

inline ListKind parse_list_kind(std::string_view s) {
  for (auto k : {ListKind::deny, ListKind::allow, ListKind::cdn_cloud, ListKind::sinkhole})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown list kind '" + std::string(s) + "' (deny, allow, cdn_cloud, sinkhole)");
}

struct InvalidListLine {
  std::size_t line = 0;
  std::string text;
};

/// An address list. Membership checks one hash lookup per distinct prefix length.
class IpListSource {
 public:
  std::string name;
  ListKind kind = ListKind::deny;
  std::chrono::system_clock::time_point loaded_at{};
  std::vector<InvalidListLine> invalid_lines;

  IpListSource() = default;
  IpListSource(std::string list_name, ListKind k) : name(std::move(list_name)), kind(k) {}

  void add(const Cidr& c) {
    if (!entries_.insert(c).second) return;
    by_length_[{c.network().family(), c.prefix_len()}].insert(c.network());
  }

  bool contains(const IpAddress& a) const {
    for (const auto& [key, nets] : by_length_) {
      if (key.first != a.family()) continue;
      if (nets.contains(a.masked(key.second))) return true;
    }
    return false;
  }

  const std::set<Cidr>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::set<Cidr> entries_;
  std::map<std::pair<IpAddress::Family, int>, std::unordered_set<IpAddress>> by_length_;
};

/// One address or CIDR per line; `#` starts a comment. Bad lines are kept in
/// invalid_lines rather than failing the load.
inline IpListSource read_ip_list(std::istream& in, std::string name, ListKind kind) {
  IpListSource src(std::move(name), kind);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = trim(sv);
    if (sv.empty()) continue;
    if (auto c = Cidr::parse(sv))
      src.add(*c);
    else
      src.invalid_lines.push_back({lineno, std::string(sv)});
  }
  src.loaded_at = std::chrono::system_clock::now();
  return src;
}

inline IpListSource load_ip_list(const std::string& path, ListKind kind) {
  auto in = open_input(path);
  return read_ip_list(in, path, kind);
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// What a rule may look at: the model score and the host's feature values.
struct HostEvidence {
  IpAddress host_ip;
  CalendarDay window_date;
  double score = 0;
  std::map<std::string, double, std::less<>> features;

  std::optional<double> feature(std::string_view name) const {
    auto it = features.find(name);
    if (it == features.end()) return std::nullopt;
    return it->second;
  }
};

struct Rule {
  std::string name;
  std::function<bool(const HostEvidence&)> passes;
};

using RuleSet = std::vector<Rule>;

struct TriageConfig {
  double threshold = 0.5;
  double min_devices = 2;
  double min_periodicity = 0.5;
  std::vector<std::string> enabled = {"min_score", "min_devices", "min_periodicity"};

  /// Keys: threshold, min_devices, min_periodicity, rules (comma-separated names).
  static TriageConfig load(const std::string& path) {
    const auto kv = load_key_values(path);
    TriageConfig c;
    c.threshold = kv_double(kv, "threshold", c.threshold, path);
    c.min_devices = kv_double(kv, "min_devices", c.min_devices, path);
    c.min_periodicity = kv_double(kv, "min_periodicity", c.min_periodicity, path);
    if (auto it = kv.find("rules"); it != kv.end()) {
      c.enabled.clear();
      for (auto part : split(it->second, ','))
        if (!trim(part).empty()) c.enabled.emplace_back(trim(part));
    }
    return c;
  }
};

namespace detail {

inline std::function<bool(const HostEvidence&)> feature_at_least(std::string feature, double min) {
  return [feature = std::move(feature), min](const HostEvidence& h) {
    const auto v = h.feature(feature);
    return v && *v >= min;
  };
}

}  // namespace detail

/// The shipped rules, filtered to cfg.enabled (in enabled order).
inline RuleSet default_rules(const TriageConfig& cfg) {
  std::map<std::string, Rule> all;
  all["min_score"] = {"min_score", [t = cfg.threshold](const HostEvidence& h) { return h.score >= t; }};
  all["min_devices"] = {"min_devices", detail::feature_at_least("device_count", cfg.min_devices)};
  all["min_periodicity"] = {"min_periodicity", detail::feature_at_least("periodicity_score", cfg.min_periodicity)};
  RuleSet out;
  for (const auto& n : cfg.enabled) {
    auto it = all.find(n);
    if (it == all.end()) throw InvalidArgument("unknown triage rule '" + n + "'");
    out.push_back(it->second);
  }
  return out;
}

/// Feature columns the shipped rules read.
inline std::vector<std::string> rule_features() { return {"device_count", "periodicity_score"}; }

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

enum class TriageOutcome {
  known_malicious,
  suppressed_allowlist,
  suppressed_cdn,
  suppressed_sinkhole,
  candidate,
  dismissed,  // survived the lists but failed a rule
};

inline std::string to_string(TriageOutcome o) {
  switch (o) {
    case TriageOutcome::known_malicious: return "known_malicious";
    case TriageOutcome::suppressed_allowlist: return "suppressed_allowlist";
    case TriageOutcome::suppressed_cdn: return "suppressed_cdn";
    case TriageOutcome::suppressed_sinkhole: return "suppressed_sinkhole";
    case TriageOutcome::candidate: return "candidate";
    case TriageOutcome::dismissed: return "dismissed";
  }
  return "?";
}

struct TriageDecision {
  IpAddress host_ip;
  CalendarDay window_date;
  double score = 0;
  TriageOutcome outcome = TriageOutcome::dismissed;
  std::vector<std::string> matched_rules;  // rules the host passed
  std::string matched_list;                // list that decided a list outcome
};

namespace detail {

inline const IpListSource* first_match(const std::vector<IpListSource>& lists, ListKind kind,
                                       const IpAddress& a) {
  for (const auto& l : lists)
    if (l.kind == kind && l.contains(a)) return &l;
  return nullptr;
}

}  // namespace detail

/// Denylist first, then allow, cdn and sinkhole suppression, then rules.
inline std::vector<TriageDecision> triage(const std::vector<HostEvidence>& flagged,
                                          const std::vector<IpListSource>& lists, const RuleSet& rules,
                                          int jobs = 1) {
  for (const auto& h : flagged)
    if (!(h.score >= 0.0 && h.score <= 1.0))
      throw InvalidArgument("triage: score for " + h.host_ip.to_string() + " is outside [0, 1]");
  std::vector<TriageDecision> out(flagged.size());
  parallel_for(flagged.size(), jobs, [&](std::size_t i) {
    const auto& h = flagged[i];
    TriageDecision d{h.host_ip, h.window_date, h.score, TriageOutcome::dismissed, {}, {}};
    static constexpr std::pair<ListKind, TriageOutcome> kOrder[] = {
        {ListKind::deny, TriageOutcome::known_malicious},
        {ListKind::allow, TriageOutcome::suppressed_allowlist},
        {ListKind::cdn_cloud, TriageOutcome::suppressed_cdn},
        {ListKind::sinkhole, TriageOutcome::suppressed_sinkhole}};
    for (const auto& [kind, outcome] : kOrder) {
      if (const auto* l = detail::first_match(lists, kind, h.host_ip)) {
        d.outcome = outcome;
        d.matched_list = l->name;
        out[i] = std::move(d);
        return;
      }
    }
    bool all = true;
    for (const auto& r : rules) {
      if (r.passes(h))
        d.matched_rules.push_back(r.name);
      else
        all = false;
    }
    d.outcome = all ? TriageOutcome::candidate : TriageOutcome::dismissed;
    out[i] = std::move(d);
  });
  return out;
}

inline void write_decisions(std::ostream& out, const std::vector<TriageDecision>& ds) {
  out << "host_ip,window_date,score,outcome,matched_list,matched_rules\n";
  for (const auto& d : ds) {
    std::string rules;
    for (std::size_t i = 0; i < d.matched_rules.size(); ++i) rules += (i ? ";" : "") + d.matched_rules[i];
    out << d.host_ip.to_string() << ',' << d.window_date.to_string() << ',' << format_double(d.score) << ','
        << to_string(d.outcome) << ',' << d.matched_list << ',' << rules << '\n';
  }
}

/// Evidence for every row of a feature table, with scores in row order.
inline std::vector<HostEvidence> evidence_from_table(const FeatureTable& t, const std::vector<double>& scores) {
  if (scores.size() != t.rows.size()) throw InvalidArgument("evidence: scores and feature rows differ in count");
  std::vector<HostEvidence> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    HostEvidence h{t.rows[i].host_ip, t.rows[i].window_date, scores[i], {}};
    for (const auto& f : rule_features())
      if (auto c = t.column(f)) h.features.emplace(f, t.rows[i].values[*c]);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace c2flow
