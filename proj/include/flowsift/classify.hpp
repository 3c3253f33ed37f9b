#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "flowsift/detail/text.hpp"
#include "flowsift/flow.hpp"
#include "flowsift/likelihood.hpp"

namespace flowsift {

enum class Mode : std::uint8_t {
  Strict,
  Majority,
  IncrementalStrict,
  IncrementalMajority,
};

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Strict: return "strict";
    case Mode::Majority: return "majority";
    case Mode::IncrementalStrict: return "incremental_strict";
    case Mode::IncrementalMajority: return "incremental_majority";
  }
  throw Error("invalid mode value");
}

inline Mode parse_mode(std::string_view s) {
  if (s == "strict") return Mode::Strict;
  if (s == "majority") return Mode::Majority;
  if (s == "incremental_strict") return Mode::IncrementalStrict;
  if (s == "incremental_majority") return Mode::IncrementalMajority;
  throw Error("unrecognized mode: '" + std::string(s) + "'");
}

/// Certainty thresholds expressed as likelihood ratios (> 1), plus the
/// minimum subflow count incremental decisions must wait for.
struct DecisionPolicy {
  double threshold_known = 19.0;
  double threshold_unknown = 19.0;
  int min_subflows = 15;
  Mode mode = Mode::Strict;
};

inline void validate_policy(const DecisionPolicy& p) {
  if (!(p.threshold_known > 1.0) || !(p.threshold_unknown > 1.0))
    throw Error("certainty thresholds must be ratios > 1");
  if (p.min_subflows < 1) throw Error("min_subflows must be >= 1");
}

enum class Verdict : std::uint8_t { Known, Unknown, Uncertain };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Known: return "known";
    case Verdict::Unknown: return "unknown";
    case Verdict::Uncertain: return "uncertain";
  }
  throw Error("invalid verdict value");
}

struct FlowDecision {
  Verdict verdict = Verdict::Uncertain;
  double log_ratio_known = 0.0;
  std::uint64_t subflows_used = 0;
  std::uint64_t subflows_available = 0;
  Mode mode = Mode::Strict;
};

namespace detail {

inline Verdict threshold_verdict(double log_ratio_known,
                                 const DecisionPolicy& p) {
  if (log_ratio_known >= std::log(p.threshold_known)) return Verdict::Known;
  if (-log_ratio_known >= std::log(p.threshold_unknown))
    return Verdict::Unknown;
  return Verdict::Uncertain;
}

// Larger joint likelihood wins; an exact tie fails safe to unknown.
inline Verdict majority_verdict(double log_ratio_known) {
  return log_ratio_known > 0.0 ? Verdict::Known : Verdict::Unknown;
}

}  // namespace detail

/// Accumulates the whole sequence, then classifies only if a threshold is
/// met; anything else stays uncertain.
inline FlowDecision classify_strict(std::span<const LikelihoodPair> seq,
                                    const DecisionPolicy& policy) {
  validate_policy(policy);
  if (seq.empty()) throw Error("cannot classify an empty subflow sequence");
  LikelihoodState state;
  for (const LikelihoodPair& p : seq) state = accumulate(state, p);
  double lr = certainty_ratio(state).log_ratio_known;
  return {detail::threshold_verdict(lr, policy), lr, state.m, seq.size(),
          Mode::Strict};
}

/// As strict, but an uncertain outcome resolves to the larger likelihood.
inline FlowDecision classify_majority(std::span<const LikelihoodPair> seq,
                                      const DecisionPolicy& policy) {
  FlowDecision d = classify_strict(seq, policy);
  if (d.verdict == Verdict::Uncertain)
    d.verdict = detail::majority_verdict(d.log_ratio_known);
  d.mode = Mode::Majority;
  return d;
}

/// Consumes subflows in order and stops at the first threshold crossing once
/// at least min_subflows have been seen. An exhausted stream falls back to
/// uncertain (incremental_strict) or the majority rule (incremental_majority).
inline FlowDecision classify_incremental(std::span<const LikelihoodPair> seq,
                                         const DecisionPolicy& policy) {
  validate_policy(policy);
  if (seq.empty()) throw Error("cannot classify an empty subflow sequence");
  bool majority_fallback = policy.mode == Mode::IncrementalMajority ||
                           policy.mode == Mode::Majority;
  Mode mode = majority_fallback ? Mode::IncrementalMajority
                                : Mode::IncrementalStrict;
  LikelihoodState state;
  for (const LikelihoodPair& p : seq) {
    state = accumulate(state, p);
    if (state.m < static_cast<std::uint64_t>(policy.min_subflows)) continue;
    double lr = certainty_ratio(state).log_ratio_known;
    Verdict v = detail::threshold_verdict(lr, policy);
    if (v != Verdict::Uncertain)
      return {v, lr, state.m, seq.size(), mode};
  }
  double lr = certainty_ratio(state).log_ratio_known;
  Verdict v = majority_fallback ? detail::majority_verdict(lr)
                                : Verdict::Uncertain;
  return {v, lr, state.m, seq.size(), mode};
}

inline FlowDecision classify_flow(std::span<const LikelihoodPair> seq,
                                  const DecisionPolicy& policy) {
  switch (policy.mode) {
    case Mode::Strict: return classify_strict(seq, policy);
    case Mode::Majority: return classify_majority(seq, policy);
    case Mode::IncrementalStrict:
    case Mode::IncrementalMajority: return classify_incremental(seq, policy);
  }
  throw Error("invalid mode value");
}

/// Decision output line:
/// `flow_key verdict log_ratio subflows_used subflows_available mode`.
inline std::string format_decision_line(const FlowKey& key,
                                        const FlowDecision& d) {
  std::string out = to_string(key);
  out += ' ';
  out += verdict_name(d.verdict);
  out += ' ';
  out += detail::format_double(d.log_ratio_known);
  out += ' ';
  out += std::to_string(d.subflows_used);
  out += ' ';
  out += std::to_string(d.subflows_available);
  out += ' ';
  out += mode_name(d.mode);
  return out;
}

}  // namespace flowsift
