#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

#include "flowsift/detail/text.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

/// n_xy = count of subflows predicted x whose true class is y, x,y in {k,u}.
struct ConfusionCounts {
  std::uint64_t n_kk = 0;
  std::uint64_t n_ku = 0;
  std::uint64_t n_uk = 0;
  std::uint64_t n_uu = 0;

  std::uint64_t total() const { return n_kk + n_ku + n_uk + n_uu; }
};

struct PredTruePair {
  Label predicted;
  Label truth;
};

inline ConfusionCounts count_confusion(std::span<const PredTruePair> pairs) {
  ConfusionCounts c;
  for (const PredTruePair& p : pairs) {
    if (p.predicted == Label::Known) {
      p.truth == Label::Known ? ++c.n_kk : ++c.n_ku;
    } else if (p.predicted == Label::Unknown) {
      p.truth == Label::Known ? ++c.n_uk : ++c.n_uu;
    } else {
      throw Error("confusion pairs must be labeled known or unknown");
    }
  }
  return c;
}

/// The four flow-class likelihoods, conditioned on the predicted label:
/// p_kk + p_ku = 1 and p_uk + p_uu = 1. With smoothing_alpha > 0 no entry is
/// exactly 0 or 1.
struct LikelihoodTable {
  double p_kk = 0.5;
  double p_ku = 0.5;
  double p_uk = 0.5;
  double p_uu = 0.5;
  double smoothing_alpha = 1.0;
};

/// Laplace-smoothed conditional estimates from confusion counts:
/// p_kk = (n_kk + a) / (n_kk + n_ku + 2a), and likewise per stratum.
inline LikelihoodTable fit_likelihood_table(const ConfusionCounts& c,
                                            double alpha) {
  if (alpha < 0.0) throw Error("smoothing alpha must be >= 0");
  double pred_k = static_cast<double>(c.n_kk + c.n_ku);
  double pred_u = static_cast<double>(c.n_uk + c.n_uu);
  if (alpha == 0.0 && (pred_k == 0.0 || pred_u == 0.0))
    throw Error("cannot fit likelihood table: a predicted-label stratum is "
                "empty and alpha = 0");
  LikelihoodTable t;
  t.smoothing_alpha = alpha;
  t.p_kk = (static_cast<double>(c.n_kk) + alpha) / (pred_k + 2.0 * alpha);
  t.p_ku = (static_cast<double>(c.n_ku) + alpha) / (pred_k + 2.0 * alpha);
  t.p_uk = (static_cast<double>(c.n_uk) + alpha) / (pred_u + 2.0 * alpha);
  t.p_uu = (static_cast<double>(c.n_uu) + alpha) / (pred_u + 2.0 * alpha);
  return t;
}

inline LikelihoodTable fit_likelihood_table(
    std::span<const PredTruePair> pairs, double alpha) {
  return fit_likelihood_table(count_confusion(pairs), alpha);
}

/// Per-subflow likelihood pair (p_K, p_U) selected by the predicted label.
struct LikelihoodPair {
  double p_known;
  double p_unknown;
};

inline LikelihoodPair subflow_likelihoods(const LikelihoodTable& t,
                                          Label predicted) {
  if (predicted == Label::Known) return {t.p_kk, t.p_ku};
  if (predicted == Label::Unknown) return {t.p_uk, t.p_uu};
  throw Error("predicted label must be known or unknown");
}

/// Running joint log-likelihoods over a subflow sequence. Kept in natural-log
/// space; the raw products underflow after a few hundred subflows.
struct LikelihoodState {
  double log_lk = 0.0;  // ln L_K
  double log_lu = 0.0;  // ln L_U
  std::uint64_t m = 0;  // subflows accumulated
};

inline LikelihoodState accumulate(LikelihoodState state, LikelihoodPair p) {
  if (!(p.p_known > 0.0 && p.p_known < 1.0) ||
      !(p.p_unknown > 0.0 && p.p_unknown < 1.0))
    throw Error("subflow likelihoods must lie strictly inside (0, 1)");
  state.log_lk += std::log(p.p_known);
  state.log_lu += std::log(p.p_unknown);
  state.m += 1;
  return state;
}

// States merge by summing log fields; accumulation order does not matter.
inline LikelihoodState merge(LikelihoodState a, const LikelihoodState& b) {
  a.log_lk += b.log_lk;
  a.log_lu += b.log_lu;
  a.m += b.m;
  return a;
}

struct RatioPair {
  double log_ratio_known;    // ln(L_K / L_U)
  double log_ratio_unknown;  // exact negation of log_ratio_known
};

inline RatioPair certainty_ratio(const LikelihoodState& state) {
  if (state.m == 0)
    throw Error("certainty ratio undefined before any subflow is accumulated");
  double r = state.log_lk - state.log_lu;
  return {r, -r};
}

/// Maps a certainty c in (0.5, 1) to the equivalent ratio threshold c/(1-c).
/// The argument is treated as the decimal it round-trips from, so the odds
/// come out exact for decimal inputs: 0.95 -> 19, 0.99 -> 99.
inline double certainty_to_ratio(double c) {
  if (!(c > 0.5 && c < 1.0))
    throw Error("certainty must lie strictly between 0.5 and 1, got " +
                detail::format_double(c));
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, c, std::chars_format::fixed);
  std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  std::size_t dot = s.find('.');
  std::string_view digits = dot == std::string_view::npos
                                ? std::string_view{}
                                : s.substr(dot + 1);
  if (digits.empty() || digits.size() > 17) return c / (1.0 - c);
  std::uint64_t p = 0;
  for (char d : digits) p = p * 10 + static_cast<std::uint64_t>(d - '0');
  std::uint64_t q = 1;
  for (std::size_t i = 0; i < digits.size(); ++i) q *= 10;
  return static_cast<double>(p) / static_cast<double>(q - p);
}

}  // namespace flowsift
