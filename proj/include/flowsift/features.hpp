#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowsift/detail/text.hpp"
#include "flowsift/flow.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

enum class FeatureSchema : std::uint8_t { Core8 = 0, Ext14 = 1 };

inline std::size_t schema_arity(FeatureSchema s) {
  return s == FeatureSchema::Core8 ? 8 : 14;
}

inline std::string_view schema_name(FeatureSchema s) {
  return s == FeatureSchema::Core8 ? "core8" : "ext14";
}

inline FeatureSchema parse_schema(std::string_view s) {
  if (s == "core8") return FeatureSchema::Core8;
  if (s == "ext14") return FeatureSchema::Ext14;
  throw Error("unrecognized feature schema: '" + std::string(s) + "'");
}

inline std::span<const std::string_view> feature_names(FeatureSchema s) {
  static constexpr std::array<std::string_view, 8> core8 = {
      "iat_max",  "iat_min",  "iat_mean",  "iat_std",
      "size_max", "size_min", "size_mean", "size_std"};
  static constexpr std::array<std::string_view, 14> ext14 = {
      "total_bytes", "size_max",  "size_min",       "ack_count",
      "rwnd_min",    "rwnd_max",  "size_std",       "size_mean",
      "iat_mean",    "iat_std",   "iat_max",        "iat_min",
      "pkt_throughput", "byte_throughput"};
  if (s == FeatureSchema::Core8) return {core8.data(), core8.size()};
  return {ext14.data(), ext14.size()};
}

struct SubflowRef {
  FlowKey flow_key;
  std::uint32_t index = 0;
};

/// Real-valued statistics over one subflow.
struct FeatureVector {
  std::vector<double> values;
  FeatureSchema schema = FeatureSchema::Core8;
  SubflowRef subflow_ref;
  Label label = Label::Unlabeled;
};

struct ExtractStats {
  std::uint64_t degenerate_subflows = 0;  // zero-duration subflows seen
};

namespace detail {

struct Stat4 {
  double max, min, mean, std;  // population standard deviation
};

inline Stat4 stat4(std::span<const double> xs) {
  double mx = xs[0], mn = xs[0], sum = 0.0;
  for (double x : xs) {
    mx = std::max(mx, x);
    mn = std::min(mn, x);
    sum += x;
  }
  double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) {
    double d = x - mean;
    ss += d * d;
  }
  return {mx, mn, mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

// The N-1 gaps between consecutive packets within the subflow, in seconds.
inline void collect_gaps_seconds(const Subflow& sf, std::vector<double>& out) {
  out.clear();
  out.reserve(sf.packets.size() - 1);
  for (std::size_t i = 1; i < sf.packets.size(); ++i)
    out.push_back(static_cast<double>(sf.packets[i].timestamp_us -
                                      sf.packets[i - 1].timestamp_us) *
                  1e-6);
}

inline void require_extractable(const Subflow& sf) {
  if (sf.packets.size() < 2)
    throw Error("subflow must contain at least 2 packets");
}

}  // namespace detail

/// 8-feature set: [iat_max, iat_min, iat_mean, iat_std,
///                 size_max, size_min, size_mean, size_std].
/// Inter-arrival times in seconds, sizes in bytes.
inline FeatureVector extract_core8(const Subflow& sf) {
  detail::require_extractable(sf);
  std::vector<double> gaps;
  detail::collect_gaps_seconds(sf, gaps);
  std::vector<double> sizes;
  sizes.reserve(sf.packets.size());
  for (const PacketRecord& p : sf.packets)
    sizes.push_back(static_cast<double>(p.size_bytes));
  detail::Stat4 iat = detail::stat4(gaps);
  detail::Stat4 size = detail::stat4(sizes);
  FeatureVector fv;
  fv.schema = FeatureSchema::Core8;
  fv.subflow_ref = {sf.flow_key, sf.index};
  fv.label = sf.label;
  fv.values = {iat.max,  iat.min,  iat.mean,  iat.std,
               size.max, size.min, size.mean, size.std};
  return fv;
}

/// 14-feature set: [total_bytes, size_max, size_min, ack_count, rwnd_min,
///                  rwnd_max, size_std, size_mean, iat_mean, iat_std,
///                  iat_max, iat_min, pkt_throughput, byte_throughput].
/// Throughputs are over (last_ts - first_ts); a zero-duration subflow gets
/// throughput 0 and bumps stats->degenerate_subflows.
inline FeatureVector extract_ext14(const Subflow& sf,
                                   ExtractStats* stats = nullptr) {
  detail::require_extractable(sf);
  std::vector<double> gaps;
  detail::collect_gaps_seconds(sf, gaps);
  std::vector<double> sizes;
  sizes.reserve(sf.packets.size());
  double total_bytes = 0.0;
  double ack_count = 0.0;
  std::uint32_t rwnd_min = sf.packets[0].recv_window_bytes;
  std::uint32_t rwnd_max = sf.packets[0].recv_window_bytes;
  for (const PacketRecord& p : sf.packets) {
    sizes.push_back(static_cast<double>(p.size_bytes));
    total_bytes += static_cast<double>(p.size_bytes);
    if (p.tcp_flags & tcp_flags::kAck) ack_count += 1.0;
    rwnd_min = std::min(rwnd_min, p.recv_window_bytes);
    rwnd_max = std::max(rwnd_max, p.recv_window_bytes);
  }
  detail::Stat4 iat = detail::stat4(gaps);
  detail::Stat4 size = detail::stat4(sizes);
  double duration_s = static_cast<double>(sf.packets.back().timestamp_us -
                                          sf.packets.front().timestamp_us) *
                      1e-6;
  double pkt_tput = 0.0, byte_tput = 0.0;
  if (duration_s > 0.0) {
    pkt_tput = static_cast<double>(sf.packets.size()) / duration_s;
    byte_tput = total_bytes / duration_s;
  } else if (stats) {
    ++stats->degenerate_subflows;
  }
  FeatureVector fv;
  fv.schema = FeatureSchema::Ext14;
  fv.subflow_ref = {sf.flow_key, sf.index};
  fv.label = sf.label;
  fv.values = {total_bytes,
               size.max,
               size.min,
               ack_count,
               static_cast<double>(rwnd_min),
               static_cast<double>(rwnd_max),
               size.std,
               size.mean,
               iat.mean,
               iat.std,
               iat.max,
               iat.min,
               pkt_tput,
               byte_tput};
  return fv;
}

inline FeatureVector extract(const Subflow& sf, FeatureSchema schema,
                             ExtractStats* stats = nullptr) {
  return schema == FeatureSchema::Core8 ? extract_core8(sf)
                                        : extract_ext14(sf, stats);
}

struct CdfPoint {
  double value;
  double fraction;  // cumulative, in (0, 1]; the last point is exactly 1.0
};

/// Per-class empirical CDF of one feature: sorted distinct values with their
/// cumulative fraction. Classes with no vectors get an empty list.
inline std::map<Label, std::vector<CdfPoint>> emit_cdf(
    std::span<const FeatureVector> vectors, std::size_t feature_index) {
  std::map<Label, std::vector<double>> per_class;
  for (const FeatureVector& fv : vectors) {
    if (feature_index >= fv.values.size())
      throw Error("feature index " + std::to_string(feature_index) +
                  " out of range for schema " +
                  std::string(schema_name(fv.schema)));
    per_class[fv.label].push_back(fv.values[feature_index]);
  }
  std::map<Label, std::vector<CdfPoint>> out;
  for (auto& [label, values] : per_class) {
    std::sort(values.begin(), values.end());
    std::vector<CdfPoint>& cdf = out[label];
    std::size_t n = values.size();
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && values[j] == values[i]) ++j;
      cdf.push_back({values[i], static_cast<double>(j) / static_cast<double>(n)});
      i = j;
    }
    if (!cdf.empty()) cdf.back().fraction = 1.0;  // guard against FP residue
  }
  return out;
}

/// CDF text output: one `class value fraction` line per point.
inline void write_cdf(const std::map<Label, std::vector<CdfPoint>>& cdf,
                      std::ostream& out) {
  for (const auto& [label, points] : cdf)
    for (const CdfPoint& p : points)
      out << label_name(label) << ' ' << detail::format_double(p.value) << ' '
          << detail::format_double(p.fraction) << '\n';
}

/// Feature dump: one line per subflow,
/// `label flow_key subflow_index v1,v2,...` after a schema header.
inline void write_feature_dump(std::span<const FeatureVector> vectors,
                               std::ostream& out) {
  if (!vectors.empty())
    out << "# features " << schema_name(vectors.front().schema) << '\n';
  for (const FeatureVector& fv : vectors) {
    out << label_name(fv.label) << ' ' << to_string(fv.subflow_ref.flow_key)
        << ' ' << fv.subflow_ref.index << ' ';
    for (std::size_t i = 0; i < fv.values.size(); ++i) {
      if (i) out << ',';
      out << detail::format_double(fv.values[i]);
    }
    out << '\n';
  }
}

inline void write_feature_dump(std::span<const FeatureVector> vectors,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_feature_dump(vectors, out);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace flowsift
