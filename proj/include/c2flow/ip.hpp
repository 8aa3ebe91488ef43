#pragma once

#include <arpa/inet.h>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "c2flow/common.hpp"

namespace c2flow {

/// IPv4 or IPv6 address. IPv4 occupies the first four bytes.
class IpAddress {
 public:
  enum class Family : std::uint8_t { v4 = 4, v6 = 6 };

  IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order) {
    IpAddress a;
    a.family_ = Family::v4;
    a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
    a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
    a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
    a.bytes_[3] = static_cast<std::uint8_t>(host_order);
    return a;
  }

  static std::optional<IpAddress> parse(std::string_view text) {
    text = trim(text);
    if (text.empty() || text.size() > INET6_ADDRSTRLEN) return std::nullopt;
    const std::string s(text);
    IpAddress a;
    if (s.find(':') == std::string::npos) {
      if (inet_pton(AF_INET, s.c_str(), a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::v4;
    } else {
      if (inet_pton(AF_INET6, s.c_str(), a.bytes_.data()) != 1) return std::nullopt;
      a.family_ = Family::v6;
    }
    return a;
  }

  Family family() const { return family_; }
  int bit_width() const { return family_ == Family::v4 ? 32 : 128; }
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }

  std::uint32_t v4_value() const {
    return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
           (std::uint32_t{bytes_[2]} << 8) | std::uint32_t{bytes_[3]};
  }

  /// Address with every bit past `prefix_len` cleared.
  IpAddress masked(int prefix_len) const {
    IpAddress out = *this;
    const int width = bit_width();
    for (int bit = std::max(prefix_len, 0); bit < width; ++bit)
      out.bytes_[bit / 8] &= static_cast<std::uint8_t>(~(0x80u >> (bit % 8)));
    return out;
  }

  std::string to_string() const {
    char buf[INET6_ADDRSTRLEN];
    const int af = family_ == Family::v4 ? AF_INET : AF_INET6;
    inet_ntop(af, bytes_.data(), buf, sizeof buf);
    return buf;
  }

  auto operator<=>(const IpAddress&) const = default;
  bool operator==(const IpAddress&) const = default;

 private:
  Family family_ = Family::v4;
  std::array<std::uint8_t, 16> bytes_{};
};

/// Address block in CIDR notation. A bare address is a full-length prefix.
class Cidr {
 public:
  Cidr() = default;
  Cidr(IpAddress network, int prefix_len)
      : network_(network.masked(prefix_len)), prefix_len_(prefix_len) {}

  static std::optional<Cidr> parse(std::string_view text) {
    text = trim(text);
    const auto slash = text.find('/');
    auto addr = IpAddress::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int len = addr->bit_width();
    if (slash != std::string_view::npos) {
      if (!parse_number(text.substr(slash + 1), len) || len < 0 || len > addr->bit_width())
        return std::nullopt;
    }
    return Cidr(*addr, len);
  }

  const IpAddress& network() const { return network_; }
  int prefix_len() const { return prefix_len_; }

  bool contains(const IpAddress& a) const {
    return a.family() == network_.family() && a.masked(prefix_len_) == network_;
  }

  std::string to_string() const {
    return network_.to_string() + "/" + std::to_string(prefix_len_);
  }

  auto operator<=>(const Cidr&) const = default;
  bool operator==(const Cidr&) const = default;

 private:
  IpAddress network_;
  int prefix_len_ = 32;
};

}  // namespace c2flow

template <>
struct std::hash<c2flow::IpAddress> {
  std::size_t operator()(const c2flow::IpAddress& a) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(a.family());
    for (auto b : a.bytes()) h = c2flow::splitmix64(h ^ b);
    return static_cast<std::size_t>(h);
  }
};
