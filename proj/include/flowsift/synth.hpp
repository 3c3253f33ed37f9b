#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "flowsift/detail/rng.hpp"
#include "flowsift/flow.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

/// Traffic shape of one class of flows. iat_* are the arithmetic mean and
/// standard deviation of the log-normal inter-arrival gap, in seconds;
/// size_* parameterize a truncated normal in bytes.
struct ClassProfile {
  Label label = Label::Known;
  double size_mean = 1000.0;
  double size_std = 100.0;
  double iat_mean = 0.001;
  double iat_std = 0.0005;
  double ack_prob = 1.0;
  std::uint32_t rwnd_min = 8192;
  std::uint32_t rwnd_max = 65535;
  std::uint32_t flows = 10;
  std::uint32_t packets_min = 50;
  std::uint32_t packets_max = 100;
};

struct SynthFlow {
  FlowKey key;  // canonical bidirectional key, matches assemble_flows output
  Label label = Label::Unlabeled;
  std::vector<PacketRecord> packets;
};

namespace detail {

inline void validate_profile(const ClassProfile& p, std::size_t index) {
  auto fail = [index](std::string_view what) {
    throw Error("profile " + std::to_string(index) + ": " + std::string(what));
  };
  if (p.size_mean <= 0.0 && p.size_std <= 0.0)
    fail("degenerate size distribution (zero mean and zero std)");
  if (p.iat_mean <= 0.0 && p.iat_std <= 0.0)
    fail("degenerate inter-arrival distribution (zero mean and zero std)");
  if (p.size_mean <= 0.0) fail("size_mean must be positive");
  if (p.iat_mean <= 0.0) fail("iat_mean must be positive");
  if (p.size_std < 0.0 || p.iat_std < 0.0)
    fail("standard deviations must be non-negative");
  if (p.ack_prob < 0.0 || p.ack_prob > 1.0)
    fail("ack_prob must lie in [0, 1]");
  if (p.rwnd_min > p.rwnd_max) fail("rwnd range is inverted");
  if (p.flows < 1) fail("flow count must be >= 1");
  if (p.packets_min < 2) fail("packets_per_flow minimum must be >= 2");
  if (p.packets_min > p.packets_max) fail("packets_per_flow range is inverted");
}

// Gaps are clamped below half the default idle timeout so generated flows
// survive assembly with identical boundaries.
inline constexpr std::uint64_t kMaxGapUs = 30'000'000;
inline constexpr std::uint64_t kStartWindowUs = 10'000'000;

}  // namespace detail

/// Generates one packet sequence per flow, deterministically from the seed.
/// Every flow gets a distinct 5-tuple and strictly increasing timestamps.
inline std::vector<SynthFlow> generate(std::span<const ClassProfile> profiles,
                                       std::uint64_t seed) {
  if (profiles.empty()) throw Error("no traffic profiles given");
  for (std::size_t i = 0; i < profiles.size(); ++i)
    detail::validate_profile(profiles[i], i);

  std::vector<SynthFlow> out;
  std::uint32_t global_flow = 0;
  for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
    const ClassProfile& prof = profiles[pi];
    for (std::uint32_t fi = 0; fi < prof.flows; ++fi, ++global_flow) {
      detail::Rng rng(detail::mix_seed(seed, {0x666C6F77ull, pi, fi}));
      SynthFlow flow;
      flow.label = prof.label;

      PacketRecord proto;
      // Distinct per flow for up to 2^24 flows: the source address
      // enumerates the global flow counter.
      proto.src_ip = (10u << 24) | (global_flow & 0x00FFFFFFu);
      proto.dst_ip = (172u << 24) | (16u << 16) |
                     (((global_flow >> 8) & 0xFFu) << 8) |
                     (global_flow & 0xFFu);
      proto.src_port = static_cast<std::uint16_t>(20000 + global_flow % 40000);
      proto.dst_port = 443;
      proto.protocol = 6;
      flow.key = flow_key_of(proto, /*bidirectional=*/true);

      std::uint64_t count =
          rng.uniform_u64(prof.packets_min, prof.packets_max);
      std::uint64_t ts = rng.uniform_u64(0, detail::kStartWindowUs);
      flow.packets.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        PacketRecord p = proto;
        p.timestamp_us = ts;
        double size = std::round(rng.normal(prof.size_mean, prof.size_std));
        p.size_bytes = static_cast<std::uint32_t>(
            std::clamp(size, 40.0, 65535.0));
        p.tcp_flags = rng.u01() < prof.ack_prob ? tcp_flags::kAck : 0;
        p.recv_window_bytes = static_cast<std::uint32_t>(
            rng.uniform_u64(prof.rwnd_min, prof.rwnd_max));
        flow.packets.push_back(p);

        double gap_s = rng.lognormal_from_moments(prof.iat_mean, prof.iat_std);
        std::uint64_t gap_us = static_cast<std::uint64_t>(
            std::clamp(std::round(gap_s * 1e6), 1.0,
                       static_cast<double>(detail::kMaxGapUs)));
        ts += gap_us;
      }
      out.push_back(std::move(flow));
    }
  }
  return out;
}

/// Interleaves all flows into one capture-order record stream.
inline std::vector<PacketRecord> merge_records(
    std::span<const SynthFlow> flows) {
  std::size_t total = 0;
  for (const SynthFlow& f : flows) total += f.packets.size();
  std::vector<PacketRecord> out;
  out.reserve(total);
  for (const SynthFlow& f : flows)
    out.insert(out.end(), f.packets.begin(), f.packets.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const PacketRecord& a, const PacketRecord& b) {
                     return a.timestamp_us < b.timestamp_us;
                   });
  return out;
}

inline std::vector<std::pair<FlowKey, Label>> label_pairs(
    std::span<const SynthFlow> flows) {
  std::vector<std::pair<FlowKey, Label>> out;
  out.reserve(flows.size());
  for (const SynthFlow& f : flows) out.emplace_back(f.key, f.label);
  return out;
}

namespace detail {

inline std::uint32_t scaled(std::uint32_t base, double scale) {
  double v = std::round(static_cast<double>(base) * scale);
  return static_cast<std::uint32_t>(std::max(1.0, v));
}

}  // namespace detail

/// Well-separated preset: bulk-transfer traffic against a clearly different
/// background class, plus a tier of very long flows so every subflow size has
/// flows long enough to classify. Class separation is far beyond 5 sigma.
inline std::vector<ClassProfile> scidmz_like_preset(double scale = 1.0) {
  std::vector<ClassProfile> p(4);
  // known: fast, large, ACK-heavy transfers
  p[0] = {Label::Known, 1250.0, 40.0, 0.0008, 0.0004, 0.95,
          57344,        65535,  detail::scaled(188, scale), 1600, 3200};
  p[1] = p[0];
  p[1].flows = detail::scaled(12, scale);
  p[1].packets_min = 57500;
  p[1].packets_max = 62000;
  // unknown: small, slow, sparse-ACK background traffic
  p[2] = {Label::Unknown, 640.0, 45.0, 0.0035, 0.002, 0.55,
          8192,           24576, detail::scaled(188, scale), 1600, 3200};
  p[3] = p[2];
  p[3].flows = detail::scaled(12, scale);
  p[3].packets_min = 57500;
  p[3].packets_max = 62000;
  return p;
}

/// Overlapping preset: the two classes differ only slightly in every
/// dimension, so subflow classification is noisy and strict-certainty
/// decisions leave some flows uncertain.
inline std::vector<ClassProfile> general_like_preset(double scale = 1.0) {
  std::vector<ClassProfile> p(4);
  p[0] = {Label::Known, 1000.0, 300.0, 0.0012, 0.0008, 0.76,
          16384,        65535,  detail::scaled(192, scale), 900, 2400};
  p[1] = p[0];
  p[1].flows = detail::scaled(8, scale);
  p[1].packets_min = 19500;
  p[1].packets_max = 22500;
  p[2] = {Label::Unknown, 1060.0, 300.0, 0.00135, 0.0009, 0.72,
          14336,          65535,  detail::scaled(192, scale), 900, 2400};
  p[3] = p[2];
  p[3].flows = detail::scaled(8, scale);
  p[3].packets_min = 19500;
  p[3].packets_max = 22500;
  return p;
}

inline std::vector<ClassProfile> preset_by_name(std::string_view name,
                                                double scale = 1.0) {
  if (name == "scidmz-like") return scidmz_like_preset(scale);
  if (name == "general-like") return general_like_preset(scale);
  throw Error("unrecognized preset: '" + std::string(name) +
              "' (expected scidmz-like or general-like)");
}

}  // namespace flowsift
