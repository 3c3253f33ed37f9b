#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowsift {

// Raised for malformed inputs, contract violations, and I/O failures.
// The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace tcp_flags {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
inline constexpr std::uint8_t kEce = 0x40;
inline constexpr std::uint8_t kCwr = 0x80;
}  // namespace tcp_flags

/// One captured packet. IPs and ports are host byte order. size_bytes is the
/// IP total length, so it is independent of link-layer padding.
/// recv_window_bytes is the raw advertised window; window scale is not applied.
struct PacketRecord {
  std::uint64_t timestamp_us = 0;
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 6;
  std::uint32_t size_bytes = 0;
  std::uint8_t tcp_flags = 0;
  std::uint32_t recv_window_bytes = 0;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

enum class Label : std::uint8_t { Known = 0, Unknown = 1, Unlabeled = 2 };

inline std::string_view label_name(Label l) {
  switch (l) {
    case Label::Known: return "known";
    case Label::Unknown: return "unknown";
    case Label::Unlabeled: return "unlabeled";
  }
  throw Error("invalid label value");
}

inline Label parse_label(std::string_view s) {
  if (s == "known") return Label::Known;
  if (s == "unknown") return Label::Unknown;
  if (s == "unlabeled") return Label::Unlabeled;
  throw Error("unrecognized label: '" + std::string(s) + "'");
}

inline std::string ipv4_to_string(std::uint32_t ip) {
  std::string out;
  out.reserve(15);
  for (int shift = 24; shift >= 0; shift -= 8) {
    if (!out.empty()) out.push_back('.');
    out += std::to_string((ip >> shift) & 0xFFu);
  }
  return out;
}

inline std::uint32_t parse_ipv4(std::string_view s) {
  std::uint32_t ip = 0;
  int octets = 0;
  std::size_t i = 0;
  while (octets < 4) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9')
      throw Error("malformed IPv4 address: '" + std::string(s) + "'");
    std::uint32_t v = 0;
    std::size_t digits = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
      v = v * 10 + static_cast<std::uint32_t>(s[i] - '0');
      if (v > 255 || ++digits > 3)
        throw Error("malformed IPv4 address: '" + std::string(s) + "'");
      ++i;
    }
    ip = (ip << 8) | v;
    ++octets;
    if (octets < 4) {
      if (i >= s.size() || s[i] != '.')
        throw Error("malformed IPv4 address: '" + std::string(s) + "'");
      ++i;
    }
  }
  if (i != s.size())
    throw Error("malformed IPv4 address: '" + std::string(s) + "'");
  return ip;
}

}  // namespace flowsift
