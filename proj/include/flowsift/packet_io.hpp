#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "flowsift/detail/text.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

/// Per-category counts of packets present in a capture but not emitted.
struct SkipStats {
  std::uint64_t non_ipv4 = 0;    // non-Ethernet-IPv4 frames (incl. ARP, IPv6)
  std::uint64_t non_tcp = 0;     // IPv4 but not protocol 6
  std::uint64_t fragments = 0;   // non-first IP fragments
  std::uint64_t truncated = 0;   // capture slice too short to decode headers

  std::uint64_t total() const {
    return non_ipv4 + non_tcp + fragments + truncated;
  }
};

struct PcapReadResult {
  std::vector<PacketRecord> records;
  SkipStats skipped;
  bool truncated_tail = false;  // file ended mid-record; parsed prefix returned
};

namespace detail {

inline constexpr std::uint32_t kPcapMagicUs = 0xA1B2C3D4u;
inline constexpr std::uint32_t kPcapMagicUsSwapped = 0xD4C3B2A1u;
inline constexpr std::uint32_t kPcapMagicNs = 0xA1B23C4Du;
inline constexpr std::uint32_t kPcapMagicNsSwapped = 0x4D3CB2A1u;

inline std::uint32_t bswap32(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) |
         ((v & 0x00FF0000u) >> 8) | ((v & 0xFF000000u) >> 24);
}

inline std::uint32_t load_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t load_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

// Network byte order (big-endian) loads for packet contents.
inline std::uint16_t load_u16be(const unsigned char* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t load_u32be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

// Decodes one captured Ethernet frame into a PacketRecord, or bumps the
// matching skip counter. Returns true when a record was produced.
inline bool decode_frame(std::span<const unsigned char> data,
                         std::uint64_t timestamp_us, PacketRecord& out,
                         SkipStats& skipped) {
  if (data.size() < 14) {
    ++skipped.truncated;
    return false;
  }
  std::size_t l3 = 14;
  std::uint16_t ethertype = load_u16be(data.data() + 12);
  if (ethertype == 0x8100) {  // one 802.1Q tag unwrapped
    if (data.size() < 18) {
      ++skipped.truncated;
      return false;
    }
    ethertype = load_u16be(data.data() + 16);
    l3 = 18;
  }
  if (ethertype != 0x0800) {
    ++skipped.non_ipv4;
    return false;
  }
  if (data.size() < l3 + 20) {
    ++skipped.truncated;
    return false;
  }
  const unsigned char* ip = data.data() + l3;
  if ((ip[0] >> 4) != 4) {
    ++skipped.non_ipv4;
    return false;
  }
  std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0F) * 4;
  std::uint16_t total_length = load_u16be(ip + 2);
  if (ihl < 20 || total_length < ihl || data.size() < l3 + ihl) {
    ++skipped.truncated;
    return false;
  }
  std::uint16_t frag = load_u16be(ip + 6);
  if ((frag & 0x1FFF) != 0) {  // non-first fragment: no TCP header to read
    ++skipped.fragments;
    return false;
  }
  if (ip[9] != 6) {
    ++skipped.non_tcp;
    return false;
  }
  const unsigned char* tcp = ip + ihl;
  if (data.size() < l3 + ihl + 20) {
    ++skipped.truncated;
    return false;
  }
  out.timestamp_us = timestamp_us;
  out.src_ip = load_u32be(ip + 12);
  out.dst_ip = load_u32be(ip + 16);
  out.src_port = load_u16be(tcp + 0);
  out.dst_port = load_u16be(tcp + 2);
  out.protocol = 6;
  out.size_bytes = total_length;
  out.tcp_flags = tcp[13];
  out.recv_window_bytes = load_u16be(tcp + 14);
  return true;
}

}  // namespace detail

/// Reads a classic PCAP file (either endianness, microsecond or nanosecond
/// timestamps, Ethernet link type). Emits one record per Ethernet/IPv4/TCP
/// packet in file order; everything else is counted in SkipStats. A file that
/// ends mid-record yields the parsed prefix with truncated_tail set.
inline PcapReadResult read_pcap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());

  unsigned char header[24];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (in.gcount() != sizeof header)
    throw Error(path.string() + ": not a classic PCAP file (short header)");

  std::uint32_t magic = detail::load_u32le(header);
  bool swapped = false;
  bool nanos = false;
  switch (magic) {
    case detail::kPcapMagicUs: break;
    case detail::kPcapMagicUsSwapped: swapped = true; break;
    case detail::kPcapMagicNs: nanos = true; break;
    case detail::kPcapMagicNsSwapped: swapped = true; nanos = true; break;
    default:
      throw Error(path.string() + ": not a classic PCAP file (bad magic)");
  }
  auto u32 = [swapped](const unsigned char* p) {
    std::uint32_t v = detail::load_u32le(p);
    return swapped ? detail::bswap32(v) : v;
  };
  std::uint32_t linktype = u32(header + 20);
  if (linktype != 1)
    throw Error(path.string() + ": unsupported link type " +
                std::to_string(linktype) + " (only Ethernet is supported)");

  PcapReadResult result;
  std::vector<unsigned char> buf;
  while (true) {
    unsigned char rec[16];
    in.read(reinterpret_cast<char*>(rec), sizeof rec);
    std::streamsize got = in.gcount();
    if (got == 0) break;
    if (got != sizeof rec) {
      result.truncated_tail = true;
      break;
    }
    std::uint64_t ts_sec = u32(rec + 0);
    std::uint64_t ts_frac = u32(rec + 4);
    std::uint32_t incl_len = u32(rec + 8);
    std::uint64_t timestamp_us =
        ts_sec * 1'000'000ull + (nanos ? ts_frac / 1000 : ts_frac);

    buf.resize(incl_len);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(incl_len));
    if (in.gcount() != static_cast<std::streamsize>(incl_len)) {
      result.truncated_tail = true;
      break;
    }
    PacketRecord record;
    if (detail::decode_frame(buf, timestamp_us, record, result.skipped))
      result.records.push_back(record);
  }
  return result;
}

inline constexpr std::string_view kPktrecHeader = "# pktrec v1";

/// Reads the line-oriented packet-record text format. Blank lines and lines
/// starting with '#' are ignored; any malformed line is an error naming the
/// line number.
inline std::vector<PacketRecord> read_records(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  std::vector<PacketRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = detail::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = detail::split_ws(sv);
    if (f.size() != 9)
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected 9 fields, got " + std::to_string(f.size()));
    try {
      PacketRecord r;
      r.timestamp_us = detail::parse_u64(f[0], "timestamp_us");
      r.src_ip = parse_ipv4(f[1]);
      r.dst_ip = parse_ipv4(f[2]);
      r.src_port = static_cast<std::uint16_t>(
          detail::parse_u64_max(f[3], "src_port", 65535));
      r.dst_port = static_cast<std::uint16_t>(
          detail::parse_u64_max(f[4], "dst_port", 65535));
      r.protocol = static_cast<std::uint8_t>(
          detail::parse_u64_max(f[5], "protocol", 255));
      r.size_bytes = static_cast<std::uint32_t>(
          detail::parse_u64_max(f[6], "size_bytes", 0xFFFFFFFFu));
      r.tcp_flags = static_cast<std::uint8_t>(
          detail::parse_u64_max(f[7], "tcp_flags", 255));
      r.recv_window_bytes = static_cast<std::uint32_t>(
          detail::parse_u64_max(f[8], "recv_window_bytes", 0xFFFFFFFFu));
      out.push_back(r);
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " +
                  e.what());
    }
  }
  return out;
}

inline void write_records(std::span<const PacketRecord> records,
                          std::ostream& out) {
  out << kPktrecHeader << '\n';
  for (const PacketRecord& r : records) {
    out << r.timestamp_us << ' ' << ipv4_to_string(r.src_ip) << ' '
        << ipv4_to_string(r.dst_ip) << ' ' << r.src_port << ' ' << r.dst_port
        << ' ' << static_cast<unsigned>(r.protocol) << ' ' << r.size_bytes
        << ' ' << static_cast<unsigned>(r.tcp_flags) << ' '
        << r.recv_window_bytes << '\n';
  }
}

inline void write_records(std::span<const PacketRecord> records,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_records(records, out);
  if (!out) throw Error("write failed: " + path.string());
}

/// Reads either format, sniffing the PCAP magic in the first four bytes.
inline std::vector<PacketRecord> read_capture(
    const std::filesystem::path& path, SkipStats* skipped = nullptr,
    bool* truncated_tail = nullptr) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error("cannot open: " + path.string());
  unsigned char magic[4] = {0, 0, 0, 0};
  probe.read(reinterpret_cast<char*>(magic), 4);
  probe.close();
  std::uint32_t m = detail::load_u32le(magic);
  if (m == detail::kPcapMagicUs || m == detail::kPcapMagicUsSwapped ||
      m == detail::kPcapMagicNs || m == detail::kPcapMagicNsSwapped) {
    PcapReadResult res = read_pcap(path);
    if (skipped) *skipped = res.skipped;
    if (truncated_tail) *truncated_tail = res.truncated_tail;
    return std::move(res.records);
  }
  if (skipped) *skipped = SkipStats{};
  if (truncated_tail) *truncated_tail = false;
  return read_records(path);
}

}  // namespace flowsift
