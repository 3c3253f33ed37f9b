#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowsift/detail/text.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

struct Endpoint {
  std::uint32_t ip = 0;
  std::uint16_t port = 0;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// 5-tuple flow identity. In bidirectional mode (endpoint_a, endpoint_b) is
/// the lexicographically sorted pair, so both directions map to one key.
struct FlowKey {
  Endpoint endpoint_a;
  Endpoint endpoint_b;
  std::uint8_t protocol = 6;
  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001B3ull;
    };
    mix(k.endpoint_a.ip);
    mix(k.endpoint_a.port);
    mix(k.endpoint_b.ip);
    mix(k.endpoint_b.port);
    mix(k.protocol);
    return static_cast<std::size_t>(h);
  }
};

inline FlowKey flow_key_of(const PacketRecord& p, bool bidirectional) {
  FlowKey key{{p.src_ip, p.src_port}, {p.dst_ip, p.dst_port}, p.protocol};
  if (bidirectional && key.endpoint_b < key.endpoint_a)
    std::swap(key.endpoint_a, key.endpoint_b);
  return key;
}

inline std::string to_string(const Endpoint& e) {
  return ipv4_to_string(e.ip) + ":" + std::to_string(e.port);
}

inline std::string to_string(const FlowKey& k) {
  return to_string(k.endpoint_a) + "-" + to_string(k.endpoint_b) + "/" +
         std::to_string(k.protocol);
}

inline Endpoint parse_endpoint(std::string_view s) {
  std::size_t colon = s.rfind(':');
  if (colon == std::string_view::npos)
    throw Error("malformed endpoint: '" + std::string(s) + "'");
  Endpoint e;
  e.ip = parse_ipv4(s.substr(0, colon));
  e.port = static_cast<std::uint16_t>(
      detail::parse_u64_max(s.substr(colon + 1), "port", 65535));
  return e;
}

inline FlowKey parse_flow_key(std::string_view s) {
  std::size_t slash = s.rfind('/');
  if (slash == std::string_view::npos)
    throw Error("malformed flow key: '" + std::string(s) + "'");
  std::string_view pair = s.substr(0, slash);
  std::size_t dash = pair.find('-');
  if (dash == std::string_view::npos)
    throw Error("malformed flow key: '" + std::string(s) + "'");
  FlowKey key;
  key.endpoint_a = parse_endpoint(pair.substr(0, dash));
  key.endpoint_b = parse_endpoint(pair.substr(dash + 1));
  key.protocol = static_cast<std::uint8_t>(
      detail::parse_u64_max(s.substr(slash + 1), "protocol", 255));
  return key;
}

/// All packets of one 5-tuple conversation, split on idle timeout.
/// Packets are in non-decreasing timestamp order.
struct Flow {
  FlowKey key;
  std::vector<PacketRecord> packets;
  Label label = Label::Unlabeled;
};

/// N consecutive packets of one flow; the unit of feature extraction.
struct Subflow {
  FlowKey flow_key;
  std::uint32_t index = 0;  // ordinal within flow, 0-based
  Label label = Label::Unlabeled;
  std::vector<PacketRecord> packets;
};

struct AssembleOptions {
  bool bidirectional = true;
  std::uint64_t idle_timeout_us = 60'000'000;
  std::uint64_t reorder_slack_us = 0;
};

/// Groups a time-ordered record stream into flows. A gap >= idle_timeout_us
/// between consecutive same-key packets starts a new flow. Flows come back in
/// first-packet arrival order. Input more than reorder_slack_us out of order
/// is an error.
inline std::vector<Flow> assemble_flows(std::span<const PacketRecord> records,
                                        const AssembleOptions& opts = {}) {
  std::vector<Flow> flows;
  std::unordered_map<FlowKey, std::size_t, FlowKeyHash> open;
  std::uint64_t high_ts = 0;
  bool first = true;
  for (const PacketRecord& rec : records) {
    if (!first && rec.timestamp_us + opts.reorder_slack_us < high_ts)
      throw Error("out-of-order packet at timestamp_us=" +
                  std::to_string(rec.timestamp_us) + " (high water mark " +
                  std::to_string(high_ts) + ", slack " +
                  std::to_string(opts.reorder_slack_us) + ")");
    first = false;
    if (rec.timestamp_us > high_ts) high_ts = rec.timestamp_us;

    FlowKey key = flow_key_of(rec, opts.bidirectional);
    auto it = open.find(key);
    if (it != open.end()) {
      Flow& f = flows[it->second];
      if (rec.timestamp_us - f.packets.back().timestamp_us >=
          opts.idle_timeout_us) {
        it->second = flows.size();
        flows.push_back(Flow{key, {}, Label::Unlabeled});
        flows.back().packets.push_back(rec);
      } else {
        f.packets.push_back(rec);
      }
    } else {
      open.emplace(key, flows.size());
      flows.push_back(Flow{key, {}, Label::Unlabeled});
      flows.back().packets.push_back(rec);
    }
  }
  return flows;
}

struct SegmentResult {
  std::vector<Subflow> subflows;
  std::uint64_t dropped_packets = 0;  // trailing remainder, < n
};

/// Splits a flow into floor(|packets|/n) consecutive non-overlapping n-packet
/// subflows; the trailing remainder is dropped and counted.
inline SegmentResult segment_subflows(const Flow& flow, std::size_t n) {
  if (n < 2) throw Error("subflow size must be >= 2");
  SegmentResult out;
  std::size_t count = flow.packets.size() / n;
  out.subflows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Subflow sf;
    sf.flow_key = flow.key;
    sf.index = static_cast<std::uint32_t>(i);
    sf.label = flow.label;
    sf.packets.assign(flow.packets.begin() + static_cast<std::ptrdiff_t>(i * n),
                      flow.packets.begin() +
                          static_cast<std::ptrdiff_t>((i + 1) * n));
    out.subflows.push_back(std::move(sf));
  }
  out.dropped_packets = flow.packets.size() - count * n;
  return out;
}

// ---- label sidecar files: one `flow_key label` pair per line ----

inline void write_label_file(
    std::span<const std::pair<FlowKey, Label>> labels,
    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << "# labels v1\n";
  for (const auto& [key, label] : labels)
    out << to_string(key) << ' ' << label_name(label) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

inline std::unordered_map<FlowKey, Label, FlowKeyHash> read_label_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  std::unordered_map<FlowKey, Label, FlowKeyHash> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = detail::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto fields = detail::split_ws(sv);
    if (fields.size() != 2)
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected 'flow_key label'");
    try {
      out[parse_flow_key(fields[0])] = parse_label(fields[1]);
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " +
                  e.what());
    }
  }
  return out;
}

/// Attaches labels from a sidecar map. With require_all, a flow whose key is
/// missing from the map is an error; otherwise it stays unlabeled.
inline void apply_labels(
    std::vector<Flow>& flows,
    const std::unordered_map<FlowKey, Label, FlowKeyHash>& labels,
    bool require_all) {
  for (Flow& f : flows) {
    auto it = labels.find(f.key);
    if (it != labels.end()) {
      f.label = it->second;
    } else if (require_all) {
      throw Error("no label for flow " + to_string(f.key));
    }
  }
}

}  // namespace flowsift
