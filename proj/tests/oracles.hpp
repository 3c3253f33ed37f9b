#pragma once

// Independent reference implementations the tests check the library against.
// Everything here deliberately takes the naive route: different algorithms,
// different accumulation order, no shared code with the implementation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "flowsift/flow.hpp"
#include "flowsift/likelihood.hpp"
#include "flowsift/types.hpp"

namespace oracles {

// Welford's online algorithm; the library uses two-pass sums.
struct NaiveStats {
  double max, min, mean, std_pop;
};

inline NaiveStats naive_stats(const std::vector<double>& xs) {
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  double mean = 0.0, m2 = 0.0;
  std::size_t count = 0;
  for (double x : xs) {
    ++count;
    double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  return {sorted.back(), sorted.front(), mean,
          std::sqrt(m2 / static_cast<double>(count))};
}

// Raw probability product; only valid for short sequences before underflow.
inline std::pair<double, double> direct_product(
    const std::vector<flowsift::LikelihoodPair>& seq) {
  double lk = 1.0, lu = 1.0;
  for (const auto& p : seq) {
    lk *= p.p_known;
    lu *= p.p_unknown;
  }
  return {lk, lu};
}

// Brute-force grouping: bucket by key, then split on the timeout with an
// explicit scan. Ignores global ordering checks.
inline std::map<flowsift::FlowKey, std::vector<std::vector<flowsift::PacketRecord>>>
brute_force_group(const std::vector<flowsift::PacketRecord>& records,
                  bool bidirectional, std::uint64_t idle_timeout_us) {
  std::map<flowsift::FlowKey, std::vector<flowsift::PacketRecord>> buckets;
  for (const auto& r : records)
    buckets[flowsift::flow_key_of(r, bidirectional)].push_back(r);
  std::map<flowsift::FlowKey, std::vector<std::vector<flowsift::PacketRecord>>>
      out;
  for (auto& [key, packets] : buckets) {
    std::vector<std::vector<flowsift::PacketRecord>> pieces;
    for (const auto& p : packets) {
      if (pieces.empty() ||
          p.timestamp_us - pieces.back().back().timestamp_us >=
              idle_timeout_us)
        pieces.emplace_back();
      pieces.back().push_back(p);
    }
    out[key] = std::move(pieces);
  }
  return out;
}

inline double gaussian_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) /
         std::sqrt(2.0 * std::numbers::pi * var);
}

// Direct-count likelihood estimates (no smoothing shortcut formulas).
struct CountedTable {
  double p_kk, p_ku, p_uk, p_uu;
};

inline CountedTable count_likelihoods(
    const std::vector<flowsift::PredTruePair>& pairs, double alpha) {
  double kk = 0, ku = 0, uk = 0, uu = 0;
  for (const auto& p : pairs) {
    bool pred_known = p.predicted == flowsift::Label::Known;
    bool true_known = p.truth == flowsift::Label::Known;
    if (pred_known && true_known) kk += 1;
    if (pred_known && !true_known) ku += 1;
    if (!pred_known && true_known) uk += 1;
    if (!pred_known && !true_known) uu += 1;
  }
  return {(kk + alpha) / (kk + ku + 2 * alpha),
          (ku + alpha) / (kk + ku + 2 * alpha),
          (uk + alpha) / (uk + uu + 2 * alpha),
          (uu + alpha) / (uk + uu + 2 * alpha)};
}

}  // namespace oracles
