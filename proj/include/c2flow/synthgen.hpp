#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/flow.hpp"
#include "c2flow/ip.hpp"

namespace c2flow {

/// Ordinary hosts: Poisson arrivals, log-normal packets and bytes-per-packet.
/// Per-host location parameters are drawn around the population values.
struct BenignProfile {
  double rate_min = 30;  // flows per day, host rate is log-uniform in [min, max]
  double rate_max = 400;
  double pkts_mu = 2.0;
  double pkts_mu_sd = 0.5;
  double pkts_sigma = 1.0;
  double bpp_mu = 6.0;
  double bpp_mu_sd = 0.4;
  double bpp_sigma = 0.6;
  double duration_mean_s = 5.0;
  int ports_min = 1;
  int ports_max = 4;
  double host_initiated = 0.2;
};

/// Beaconing hosts. In mimic mode timing, packet counts, ports and direction
/// follow the benign profile and only the bytes-per-packet spread differs,
/// with its location shifted so the expected mean matches.
struct C2Profile {
  double period_min_s = 60;
  double period_max_s = 1800;
  double jitter_sd_fraction = 0.05;  // jitter sd as a fraction of the period
  std::uint64_t bytes_min = 120;
  std::uint64_t bytes_max = 600;
  int packets_min = 1;
  int packets_max = 4;
  double background_fraction = 0.1;
  double duration_max_s = 2.0;
  bool mimic = false;
  double mimic_periodic_fraction = 0.3;  // share of mimic flows sent on a jittered schedule
  double mimic_bpp_sigma = 0.4;
};

struct ScenarioConfig {
  std::size_t n_benign_hosts = 250;
  std::size_t n_c2_hosts = 50;
  int devices_min = 2;
  int devices_max = 30;
  BenignProfile benign;
  C2Profile c2;
  CalendarDay day = CalendarDay(19723);  // 2024-01-01
  std::uint64_t seed = 1;

  void validate() const {
    if (n_benign_hosts < 1 || n_c2_hosts < 1) throw InvalidArgument("scenario: host counts must be >= 1");
    if (devices_min < 1 || devices_max < devices_min) throw InvalidArgument("scenario: bad device range");
    if (c2.jitter_sd_fraction < 0) throw InvalidArgument("scenario: jitter sd must be >= 0");
    if (c2.period_min_s <= 0 || c2.period_max_s < c2.period_min_s) throw InvalidArgument("scenario: bad period range");
    if (c2.packets_min < 1 || c2.packets_max < c2.packets_min) throw InvalidArgument("scenario: bad c2 packet range");
    if (c2.bytes_min < static_cast<std::uint64_t>(c2.packets_max) || c2.bytes_max < c2.bytes_min)
      throw InvalidArgument("scenario: c2 byte range must be ordered and at least packets_max");
    if (benign.rate_min <= 0 || benign.rate_max < benign.rate_min) throw InvalidArgument("scenario: bad rate range");
    if (benign.ports_min < 1 || benign.ports_max < benign.ports_min) throw InvalidArgument("scenario: bad port range");
    if (c2.background_fraction < 0) throw InvalidArgument("scenario: background_fraction must be >= 0");
  }

  /// Beaconing is hidden and static summaries overlap; the classes differ in
  /// the shape of the bytes-per-packet distribution.
  static ScenarioConfig overlap() {
    ScenarioConfig c;
    c.c2.mimic = true;
    return c;
  }

  /// Keys mirror the field names: n_benign_hosts, n_c2_hosts, devices_min,
  /// benign.rate_min, c2.period_min_s, c2.mimic, day, seed, ...
  static ScenarioConfig load(const std::string& path, ScenarioConfig base);
  static ScenarioConfig load(const std::string& path) { return load(path, ScenarioConfig{}); }
};

/// One generated flow, recorded before it is rendered to a FlowRecord.
struct GenEvent {
  enum class Kind { benign, beacon, background };
  IpAddress host_ip;
  Kind kind = Kind::benign;
  EpochMillis start_time = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
};

inline std::string to_string(GenEvent::Kind k) {
  switch (k) {
    case GenEvent::Kind::benign: return "benign";
    case GenEvent::Kind::beacon: return "beacon";
    case GenEvent::Kind::background: return "background";
  }
  return "?";
}

struct GeneratedScenario {
  std::vector<FlowRecord> flows;  // ascending start_time
  std::map<IpAddress, int> labels;
  std::vector<GenEvent> events;   // generation order
};

inline constexpr const char* kSynthInternalSpace = "10.0.0.0/8";

namespace detail {

inline constexpr std::uint16_t kServicePorts[] = {21, 22, 25, 53, 80, 110, 123, 143, 443, 445, 587, 993, 995, 8080, 8443, 9001};

inline double lognormal(Rng& rng, double mu, double sigma) { return std::exp(mu + sigma * standard_normal(rng)); }

inline std::uint64_t round_count(double v, std::uint64_t lo) {
  return std::max<std::uint64_t>(lo, static_cast<std::uint64_t>(std::llround(v)));
}

struct HostPlan {
  IpAddress ip;
  bool c2 = false;
  std::vector<IpAddress> devices;
};

class HostEmitter {
 public:
  HostEmitter(const ScenarioConfig& cfg, const HostPlan& plan, Rng& rng)
      : cfg_(cfg), plan_(plan), rng_(rng), day_start_(cfg.day.start_millis()) {}

  std::vector<std::pair<GenEvent, FlowRecord>> run() {
    if (!plan_.c2)
      emit_benign(GenEvent::Kind::benign, log_uniform(cfg_.benign.rate_min, cfg_.benign.rate_max), cfg_.benign.bpp_sigma, 0.0);
    else if (cfg_.c2.mimic)
      emit_mimic();
    else
      emit_beacons();
    return std::move(out_);
  }

 private:
  double log_uniform(double lo, double hi) {
    return std::exp(std::log(lo) + uniform01(rng_) * (std::log(hi) - std::log(lo)));
  }

  std::uint16_t ephemeral_port() { return static_cast<std::uint16_t>(32768 + uniform_index(rng_, 28232)); }

  void push(GenEvent::Kind kind, EpochMillis offset, std::uint64_t bytes, std::uint64_t packets,
            EpochMillis duration, const IpAddress& device, std::uint16_t service_port, bool host_initiated) {
    FlowRecord r;
    r.start_time = day_start_ + offset;
    r.end_time = std::min(r.start_time + duration, cfg_.day.end_millis());
    r.bytes = bytes;
    r.packets = packets;
    r.protocol = service_port == 53 || service_port == 123 ? 17 : 6;
    r.flags = r.protocol == 6 ? "APS" : "";
    const std::uint16_t host_port = ephemeral_port();
    // the service port is the device-side port
    if (host_initiated) {
      r.src_ip = plan_.ip;
      r.src_port = host_port;
      r.dst_ip = device;
      r.dst_port = service_port;
    } else {
      r.src_ip = device;
      r.src_port = service_port;
      r.dst_ip = plan_.ip;
      r.dst_port = host_port;
    }
    out_.push_back({GenEvent{plan_.ip, kind, r.start_time, bytes, packets}, std::move(r)});
  }

  std::vector<std::uint16_t> pick_ports(int lo, int hi) {
    std::vector<std::uint16_t> all(std::begin(kServicePorts), std::end(kServicePorts));
    shuffle(all, rng_);
    all.resize(static_cast<std::size_t>(lo + static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(hi - lo + 1)))));
    return all;
  }

  /// Poisson arrivals at `rate` per day with log-normal sizes. bpp_shift is
  /// added to the host's bytes-per-packet location.
  void emit_benign(GenEvent::Kind kind, double rate, double bpp_sigma, double bpp_shift) {
    const auto& b = cfg_.benign;
    const double pkts_mu = b.pkts_mu + b.pkts_mu_sd * standard_normal(rng_);
    const double bpp_mu = b.bpp_mu + b.bpp_mu_sd * standard_normal(rng_) + bpp_shift;
    const auto ports = pick_ports(b.ports_min, b.ports_max);
    const double mean_gap_ms = static_cast<double>(kMillisPerDay) / rate;
    double t = 0;
    while (true) {
      t += -std::log(1.0 - uniform01(rng_)) * mean_gap_ms;
      if (t >= static_cast<double>(kMillisPerDay)) break;
      const auto packets = round_count(lognormal(rng_, pkts_mu, b.pkts_sigma), 1);
      const double bpp = std::clamp(lognormal(rng_, bpp_mu, bpp_sigma), 1.0, 65535.0);
      const auto bytes = round_count(static_cast<double>(packets) * bpp, packets);
      const auto duration = static_cast<EpochMillis>(-std::log(1.0 - uniform01(rng_)) * b.duration_mean_s * 1000.0);
      const auto& device = plan_.devices[uniform_index(rng_, plan_.devices.size())];
      const auto port = ports[uniform_index(rng_, ports.size())];
      const bool host_init = uniform01(rng_) < b.host_initiated;
      push(kind, static_cast<EpochMillis>(t), bytes, packets, duration, device, port, host_init);
    }
  }

  void emit_mimic() {
    const double sb = cfg_.benign.bpp_sigma, sc = cfg_.c2.mimic_bpp_sigma;
    const double rate = log_uniform(cfg_.benign.rate_min, cfg_.benign.rate_max);
    const double f = std::clamp(cfg_.c2.mimic_periodic_fraction, 0.0, 1.0);
    const auto before = out_.size();
    emit_benign(GenEvent::Kind::beacon, std::max(rate * (1.0 - f), 1e-3), sc, 0.5 * (sb * sb - sc * sc));
    const auto n_sched = static_cast<EpochMillis>(std::llround(rate * f));
    if (n_sched == 0) return;
    // the scheduled flows reuse sizes, ports and devices of the poisson part
    const EpochMillis period = kMillisPerDay / n_sched;
    const double jitter_sd = cfg_.c2.jitter_sd_fraction * static_cast<double>(period);
    const auto phase = static_cast<EpochMillis>(uniform_index(rng_, static_cast<std::size_t>(period)));
    const auto n_pool = out_.size() - before;
    for (EpochMillis k = 0; k < n_sched && n_pool > 0; ++k) {
      const auto& tmpl = out_[before + uniform_index(rng_, n_pool)];
      const double jitter = jitter_sd > 0 ? jitter_sd * standard_normal(rng_) : 0.0;
      const auto t = std::clamp<EpochMillis>(phase + k * period + static_cast<EpochMillis>(std::llround(jitter)), 0,
                                             kMillisPerDay - 1);
      const auto& r = tmpl.second;
      const bool host_init = r.src_ip == plan_.ip;
      const auto& device = host_init ? r.dst_ip : r.src_ip;
      const auto port = host_init ? r.dst_port : r.src_port;
      const IpAddress dev = device;
      push(GenEvent::Kind::beacon, t, r.bytes, r.packets, r.end_time - r.start_time, dev, port, host_init);
    }
  }

  void emit_beacons() {
    const auto& c = cfg_.c2;
    const auto period_ms = static_cast<EpochMillis>(std::llround(
        1000.0 * (c.period_min_s + uniform01(rng_) * (c.period_max_s - c.period_min_s))));
    const double jitter_sd = c.jitter_sd_fraction * static_cast<double>(period_ms);
    const auto port = kServicePorts[uniform_index(rng_, std::size(kServicePorts))];
    const auto phase = static_cast<EpochMillis>(uniform_index(rng_, static_cast<std::size_t>(period_ms)));
    std::size_t beacons = 0;
    for (EpochMillis k = 0;; ++k) {
      const EpochMillis nominal = phase + k * period_ms;
      if (nominal >= kMillisPerDay) break;
      const double jitter = jitter_sd > 0 ? jitter_sd * standard_normal(rng_) : 0.0;
      const auto t = std::clamp<EpochMillis>(nominal + static_cast<EpochMillis>(std::llround(jitter)), 0,
                                             kMillisPerDay - 1);
      const auto packets = static_cast<std::uint64_t>(
          c.packets_min + static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(c.packets_max - c.packets_min + 1))));
      const auto bytes = c.bytes_min + uniform_index(rng_, static_cast<std::size_t>(c.bytes_max - c.bytes_min + 1));
      const auto duration = static_cast<EpochMillis>(uniform01(rng_) * c.duration_max_s * 1000.0);
      const auto& device = plan_.devices[beacons % plan_.devices.size()];
      push(GenEvent::Kind::beacon, t, bytes, packets, duration, device, port, false);
      ++beacons;
    }
    if (c.background_fraction > 0)
      emit_benign(GenEvent::Kind::background, c.background_fraction * static_cast<double>(beacons), cfg_.benign.bpp_sigma, 0.0);
  }

  const ScenarioConfig& cfg_;
  const HostPlan& plan_;
  Rng& rng_;
  EpochMillis day_start_;
  std::vector<std::pair<GenEvent, FlowRecord>> out_;
};

}  // namespace detail

/// Host h draws from seed stream (seed, 1, h); address and label assignment
/// uses (seed, 0). External hosts live in 198.18.0.0/15, devices in 10.0.0.0/8.
inline GeneratedScenario generate(const ScenarioConfig& cfg, int jobs = 1) {
  cfg.validate();
  const std::size_t n = cfg.n_benign_hosts + cfg.n_c2_hosts;
  auto rng = make_rng(cfg.seed, {0});

  // shuffled address pool so addresses carry no label information
  std::vector<std::uint32_t> offsets(n);
  for (std::size_t i = 0; i < n; ++i) offsets[i] = static_cast<std::uint32_t>(i + 1) * 7u;
  shuffle(offsets, rng);

  std::vector<detail::HostPlan> plans(n);
  for (std::size_t h = 0; h < n; ++h) {
    plans[h].ip = IpAddress::v4((198u << 24) | (18u << 16) | offsets[h]);
    plans[h].c2 = h >= cfg.n_benign_hosts;
  }

  std::vector<std::vector<std::pair<GenEvent, FlowRecord>>> per_host(n);
  parallel_for(n, jobs, [&](std::size_t h) {
    auto hr = make_rng(cfg.seed, {1, h});
    auto& plan = plans[h];
    const auto nd = static_cast<std::size_t>(cfg.devices_min) +
                    uniform_index(hr, static_cast<std::size_t>(cfg.devices_max - cfg.devices_min + 1));
    std::vector<std::uint32_t> dev;
    while (dev.size() < nd) {
      const auto d = static_cast<std::uint32_t>(uniform_index(hr, 1u << 16));
      if (std::find(dev.begin(), dev.end(), d) == dev.end()) dev.push_back(d);
    }
    for (auto d : dev) plan.devices.push_back(IpAddress::v4((10u << 24) | (1u << 16) | d));
    per_host[h] = detail::HostEmitter(cfg, plan, hr).run();
  });

  GeneratedScenario out;
  for (std::size_t h = 0; h < n; ++h) {
    out.labels[plans[h].ip] = plans[h].c2 ? 1 : 0;
    for (auto& [ev, rec] : per_host[h]) {
      out.events.push_back(ev);
      out.flows.push_back(std::move(rec));
    }
  }
  std::stable_sort(out.flows.begin(), out.flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
    return std::tie(a.start_time, a.src_ip, a.dst_ip, a.src_port, a.dst_port) <
           std::tie(b.start_time, b.src_ip, b.dst_ip, b.src_port, b.dst_port);
  });
  return out;
}

inline void write_events(std::ostream& out, const std::vector<GenEvent>& events) {
  out << "host_ip,kind,start_time,bytes,packets\n";
  for (const auto& e : events)
    out << e.host_ip.to_string() << ',' << to_string(e.kind) << ',' << e.start_time << ',' << e.bytes << ','
        << e.packets << '\n';
}

inline ScenarioConfig ScenarioConfig::load(const std::string& path, ScenarioConfig c) {
  const auto kv = load_key_values(path);
  static const std::set<std::string> known = {
      "n_benign_hosts", "n_c2_hosts", "devices_min", "devices_max", "day", "seed",
      "benign.rate_min", "benign.rate_max", "benign.pkts_mu", "benign.pkts_mu_sd", "benign.pkts_sigma",
      "benign.bpp_mu", "benign.bpp_mu_sd", "benign.bpp_sigma", "benign.duration_mean_s",
      "benign.ports_min", "benign.ports_max", "benign.host_initiated",
      "c2.period_min_s", "c2.period_max_s", "c2.jitter_sd_fraction", "c2.bytes_min", "c2.bytes_max",
      "c2.packets_min", "c2.packets_max", "c2.background_fraction", "c2.duration_max_s", "c2.mimic",
      "c2.mimic_bpp_sigma", "c2.mimic_periodic_fraction"};
  for (const auto& [k, v] : kv)
    if (!known.contains(k)) throw FormatError(path + ": unknown scenario key '" + k + "'");
  auto i = [&](const char* k, auto& field) { field = static_cast<std::remove_reference_t<decltype(field)>>(kv_int(kv, k, static_cast<long long>(field), path)); };
  auto d = [&](const char* k, double& field) { field = kv_double(kv, k, field, path); };
  i("n_benign_hosts", c.n_benign_hosts);
  i("n_c2_hosts", c.n_c2_hosts);
  i("devices_min", c.devices_min);
  i("devices_max", c.devices_max);
  i("seed", c.seed);
  if (auto it = kv.find("day"); it != kv.end()) {
    auto day = CalendarDay::parse(it->second);
    if (!day) throw FormatError(path + ": bad day '" + it->second + "'");
    c.day = *day;
  }
  d("benign.rate_min", c.benign.rate_min);
  d("benign.rate_max", c.benign.rate_max);
  d("benign.pkts_mu", c.benign.pkts_mu);
  d("benign.pkts_mu_sd", c.benign.pkts_mu_sd);
  d("benign.pkts_sigma", c.benign.pkts_sigma);
  d("benign.bpp_mu", c.benign.bpp_mu);
  d("benign.bpp_mu_sd", c.benign.bpp_mu_sd);
  d("benign.bpp_sigma", c.benign.bpp_sigma);
  d("benign.duration_mean_s", c.benign.duration_mean_s);
  i("benign.ports_min", c.benign.ports_min);
  i("benign.ports_max", c.benign.ports_max);
  d("benign.host_initiated", c.benign.host_initiated);
  d("c2.period_min_s", c.c2.period_min_s);
  d("c2.period_max_s", c.c2.period_max_s);
  d("c2.jitter_sd_fraction", c.c2.jitter_sd_fraction);
  i("c2.bytes_min", c.c2.bytes_min);
  i("c2.bytes_max", c.c2.bytes_max);
  i("c2.packets_min", c.c2.packets_min);
  i("c2.packets_max", c.c2.packets_max);
  d("c2.background_fraction", c.c2.background_fraction);
  d("c2.duration_max_s", c.c2.duration_max_s);
  if (auto it = kv.find("c2.mimic"); it != kv.end()) c.c2.mimic = it->second == "true" || it->second == "1";
  d("c2.mimic_bpp_sigma", c.c2.mimic_bpp_sigma);
  d("c2.mimic_periodic_fraction", c.c2.mimic_periodic_fraction);
  c.validate();
  return c;
}

}  // namespace c2flow
