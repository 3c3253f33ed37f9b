#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "flowsift/classify.hpp"
#include "flowsift/detail/rng.hpp"
#include "flowsift/features.hpp"
#include "flowsift/flow.hpp"
#include "flowsift/gbdt.hpp"
#include "flowsift/likelihood.hpp"
#include "flowsift/model_io.hpp"

namespace flowsift {

struct ExperimentConfig {
  std::vector<std::size_t> subflow_sizes{25, 100, 1000};
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  double certainty = 0.95;
  std::optional<double> certainty_known;    // per-class overrides
  std::optional<double> certainty_unknown;
  std::vector<Mode> modes{Mode::Strict, Mode::Majority, Mode::IncrementalStrict,
                          Mode::IncrementalMajority};
  double split_fraction = 0.8;
  std::uint64_t seed = 1;
  int min_subflows = 15;
  FeatureSchema schema = FeatureSchema::Core8;
  GbdtParams gbdt{};
  double alpha = 1.0;
  // The likelihood table is fitted on a held-out slice of the training flows
  // unless calibrate_on_train re-predicts the GBDT's own training subflows.
  double calib_fraction = 0.25;
  bool calibrate_on_train = false;
};

struct CellKey {
  Mode mode;
  std::size_t subflow_size;
  double fraction;
  Label cls;  // Known or Unknown
};

struct CellResult {
  std::optional<double> accuracy;        // absent when no flow was eligible
  std::optional<double> uncertain_rate;
  std::uint64_t flows_evaluated = 0;
  std::uint64_t flows_excluded = 0;
  std::optional<double> mean_fraction_to_decision;  // incremental modes only
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::pair<CellKey, CellResult>> cells;
  std::vector<std::pair<std::size_t, ModelBundle>> models;  // per subflow size

  const CellResult* find(Mode mode, std::size_t n, double fraction,
                         Label cls) const {
    for (const auto& [key, cell] : cells)
      if (key.mode == mode && key.subflow_size == n &&
          key.fraction == fraction && key.cls == cls)
        return &cell;
    return nullptr;
  }
};

/// One classified test flow; run_experiment streams these to an optional sink
/// so reports can be recounted or dumped.
struct DecisionRecord {
  FlowKey key;
  Label truth;
  std::size_t subflow_size;
  double fraction;
  FlowDecision decision;
};

using DecisionSink = std::function<void(const DecisionRecord&)>;

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Uniform flow-granularity split: floor/round(|flows| * fraction) flows go
/// to train, the rest to test. Both sides keep original relative order.
inline SplitIndices split_flows(std::size_t flow_count, double split_fraction,
                                std::uint64_t seed) {
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw Error("split fraction must lie strictly between 0 and 1");
  std::vector<std::size_t> order(flow_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::Rng rng(detail::mix_seed(seed, {0x73706C69ull}));
  detail::shuffle(order, rng);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(split_fraction * static_cast<double>(flow_count)));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline SplitIndices split_flows(std::span<const Flow> flows,
                                double split_fraction, std::uint64_t seed) {
  return split_flows(flows.size(), split_fraction, seed);
}

/// Number of subflows in the q-prefix of an M-subflow flow: ceil(q * M).
inline std::size_t prefix_count(std::size_t available, double q) {
  if (!(q > 0.0 && q <= 1.0))
    throw Error("subflow fraction must lie in (0, 1]");
  auto c = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(available)));
  return std::min(c, available);
}

template <typename T>
inline std::span<const T> subflow_prefix(std::span<const T> subflows,
                                         double q) {
  return subflows.first(prefix_count(subflows.size(), q));
}

namespace detail {

struct CellTally {
  std::uint64_t evaluated = 0;
  std::uint64_t excluded = 0;
  std::uint64_t correct = 0;
  std::uint64_t uncertain = 0;
  double fraction_sum = 0.0;      // of used/available over decided flows
  std::uint64_t decided = 0;

  CellResult result(bool incremental) const {
    CellResult r;
    r.flows_evaluated = evaluated;
    r.flows_excluded = excluded;
    if (evaluated > 0) {
      r.accuracy = static_cast<double>(correct) / static_cast<double>(evaluated);
      r.uncertain_rate =
          static_cast<double>(uncertain) / static_cast<double>(evaluated);
    }
    if (incremental && decided > 0)
      r.mean_fraction_to_decision = fraction_sum / static_cast<double>(decided);
    return r;
  }
};

inline bool is_incremental(Mode m) {
  return m == Mode::IncrementalStrict || m == Mode::IncrementalMajority;
}

}  // namespace detail

/// Runs the full protocol: per-class 80/20 flow split, per subflow size a
/// GBDT trained on the training slice with an out-of-fold likelihood table,
/// then every (mode, fraction) cell classified over eligible test flows.
/// Eligible means the fraction-prefix holds at least min_subflows subflows;
/// per-class accuracy counts uncertain verdicts as incorrect.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       std::span<const Flow> known_flows,
                                       std::span<const Flow> unknown_flows,
                                       const DecisionSink& sink = {}) {
  if (known_flows.empty() || unknown_flows.empty())
    throw Error("experiment needs flows of both classes");
  if (config.subflow_sizes.empty() || config.fractions.empty() ||
      config.modes.empty())
    throw Error("experiment grid is empty");

  double ratio_known = certainty_to_ratio(
      config.certainty_known.value_or(config.certainty));
  double ratio_unknown = certainty_to_ratio(
      config.certainty_unknown.value_or(config.certainty));

  SplitIndices known_split = split_flows(
      known_flows.size(), config.split_fraction,
      detail::mix_seed(config.seed, {0x6B6E6F77ull}));
  SplitIndices unknown_split = split_flows(
      unknown_flows.size(), config.split_fraction,
      detail::mix_seed(config.seed, {0x756E6B6Eull}));

  ExperimentReport report;
  report.config = config;

  const std::size_t n_modes = config.modes.size();
  const std::size_t n_fractions = config.fractions.size();

  for (std::size_t si = 0; si < config.subflow_sizes.size(); ++si) {
    const std::size_t n = config.subflow_sizes[si];

    // Training flows split again per class into GBDT-fit and calibration
    // slices, so the likelihood table reflects held-out behavior.
    auto partition_calib = [&](const std::vector<std::size_t>& train,
                               std::uint64_t salt) {
      SplitIndices inner;
      if (config.calibrate_on_train || train.size() < 2) {
        inner.train = train;
        inner.test = train;
        return inner;
      }
      SplitIndices s = split_flows(train.size(), 1.0 - config.calib_fraction,
                                   detail::mix_seed(config.seed, {salt, n}));
      for (std::size_t i : s.train) inner.train.push_back(train[i]);
      for (std::size_t i : s.test) inner.test.push_back(train[i]);
      return inner;
    };
    SplitIndices known_inner = partition_calib(known_split.train, 0x6361u);
    SplitIndices unknown_inner = partition_calib(unknown_split.train, 0x6375u);

    auto subflows_of = [&](const Flow& f, Label label) {
      Flow labeled = f;
      labeled.label = label;
      return segment_subflows(labeled, n).subflows;
    };

    std::vector<FeatureVector> fit_vectors;
    for (std::size_t i : known_inner.train)
      for (const Subflow& sf : subflows_of(known_flows[i], Label::Known))
        fit_vectors.push_back(extract(sf, config.schema));
    for (std::size_t i : unknown_inner.train)
      for (const Subflow& sf : subflows_of(unknown_flows[i], Label::Unknown))
        fit_vectors.push_back(extract(sf, config.schema));
    if (fit_vectors.empty())
      throw Error("no training subflows at subflow size " + std::to_string(n) +
                  "; flows are too short");

    GbdtModel model = train_gbdt(make_dataset(std::move(fit_vectors)),
                                 config.gbdt);

    std::vector<PredTruePair> calib_pairs;
    auto add_calib = [&](const Flow& flow, Label truth) {
      for (const Subflow& sf : subflows_of(flow, truth)) {
        FeatureVector fv = extract(sf, config.schema);
        calib_pairs.push_back({predict_gbdt(model, fv).label, truth});
      }
    };
    for (std::size_t i : known_inner.test) add_calib(known_flows[i], Label::Known);
    for (std::size_t i : unknown_inner.test)
      add_calib(unknown_flows[i], Label::Unknown);
    LikelihoodTable table = fit_likelihood_table(calib_pairs, config.alpha);

    ModelBundle bundle;
    bundle.model = model;
    bundle.likelihood = table;
    bundle.pipeline = PipelineInfo{static_cast<std::uint32_t>(n), true,
                                   60'000'000};
    report.models.emplace_back(n, std::move(bundle));

    // cell tallies indexed [mode][fraction][class]
    std::vector<detail::CellTally> tallies(n_modes * n_fractions * 2);
    auto tally_at = [&](std::size_t mi, std::size_t fi,
                        Label cls) -> detail::CellTally& {
      return tallies[(mi * n_fractions + fi) * 2 +
                     (cls == Label::Unknown ? 1 : 0)];
    };

    auto run_test_flow = [&](const Flow& flow, Label truth) {
      std::vector<Subflow> subflows = subflows_of(flow, truth);
      std::vector<LikelihoodPair> pairs;
      pairs.reserve(subflows.size());
      for (const Subflow& sf : subflows) {
        FeatureVector fv = extract(sf, config.schema);
        pairs.push_back(
            subflow_likelihoods(table, predict_gbdt(model, fv).label));
      }
      for (std::size_t fi = 0; fi < n_fractions; ++fi) {
        std::size_t pc = prefix_count(pairs.size(), config.fractions[fi]);
        bool eligible = pc >= static_cast<std::size_t>(config.min_subflows);
        std::span<const LikelihoodPair> prefix{pairs.data(), pc};
        for (std::size_t mi = 0; mi < n_modes; ++mi) {
          detail::CellTally& tally = tally_at(mi, fi, truth);
          if (!eligible) {
            ++tally.excluded;
            continue;
          }
          DecisionPolicy policy{ratio_known, ratio_unknown,
                                config.min_subflows, config.modes[mi]};
          FlowDecision decision = classify_flow(prefix, policy);
          ++tally.evaluated;
          if (decision.verdict == Verdict::Uncertain) {
            ++tally.uncertain;
          } else {
            ++tally.decided;
            tally.fraction_sum +=
                static_cast<double>(decision.subflows_used) /
                static_cast<double>(decision.subflows_available);
            bool correct =
                (decision.verdict == Verdict::Known) == (truth == Label::Known);
            if (correct) ++tally.correct;
          }
          if (sink)
            sink(DecisionRecord{flow.key, truth, n, config.fractions[fi],
                                decision});
        }
      }
    };
    for (std::size_t i : known_split.test)
      run_test_flow(known_flows[i], Label::Known);
    for (std::size_t i : unknown_split.test)
      run_test_flow(unknown_flows[i], Label::Unknown);

    for (std::size_t mi = 0; mi < n_modes; ++mi)
      for (std::size_t fi = 0; fi < n_fractions; ++fi)
        for (Label cls : {Label::Known, Label::Unknown})
          report.cells.emplace_back(
              CellKey{config.modes[mi], n, config.fractions[fi], cls},
              tally_at(mi, fi, cls).result(
                  detail::is_incremental(config.modes[mi])));
  }

  // CSV/report order: mode, subflow_size, fraction, class.
  std::stable_sort(report.cells.begin(), report.cells.end(),
                   [&](const auto& a, const auto& b) {
                     auto mode_pos = [&](Mode m) {
                       for (std::size_t i = 0; i < config.modes.size(); ++i)
                         if (config.modes[i] == m) return i;
                       return config.modes.size();
                     };
                     return mode_pos(a.first.mode) < mode_pos(b.first.mode);
                   });
  return report;
}

inline constexpr std::string_view kReportCsvHeader =
    "mode,subflow_size,fraction,class,accuracy,uncertain_rate,evaluated,"
    "excluded,mean_fraction_to_decision";

inline void write_report_csv(const ExperimentReport& report,
                             std::ostream& out) {
  out << kReportCsvHeader << '\n';
  for (const auto& [key, cell] : report.cells) {
    out << mode_name(key.mode) << ',' << key.subflow_size << ','
        << detail::format_double(key.fraction) << ',' << label_name(key.cls)
        << ',';
    if (cell.accuracy) out << detail::format_double(*cell.accuracy);
    out << ',';
    if (cell.uncertain_rate) out << detail::format_double(*cell.uncertain_rate);
    out << ',' << cell.flows_evaluated << ',' << cell.flows_excluded << ',';
    if (cell.mean_fraction_to_decision)
      out << detail::format_double(*cell.mean_fraction_to_decision);
    out << '\n';
  }
}

inline void write_report_csv(const ExperimentReport& report,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_report_csv(report, out);
  if (!out) throw Error("write failed: " + path.string());
}

namespace detail {

inline std::string format_cell_pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  int len = std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
  return std::string(buf, static_cast<std::size_t>(len));
}

}  // namespace detail

/// Aligned accuracy grids per mode (rows: subflow sizes, columns: subflow
/// fractions), with uncertain-rate and time-to-decision grids where relevant.
inline std::string render_report_text(const ExperimentReport& report) {
  std::ostringstream out;
  const auto& cfg = report.config;
  auto grid = [&](Mode mode, Label cls, auto getter, std::string_view title) {
    out << title << " (" << label_name(cls) << " flows):\n";
    out << "  subflow-size";
    for (double q : cfg.fractions) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%7.0f%%", q * 100.0);
      out << buf;
    }
    out << '\n';
    for (std::size_t n : cfg.subflow_sizes) {
      char head[32];
      std::snprintf(head, sizeof head, "  %-12zu", n);
      out << head;
      for (double q : cfg.fractions) {
        const CellResult* cell = report.find(mode, n, q, cls);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%8s",
                      cell ? getter(*cell).c_str() : "-");
        out << buf;
      }
      out << '\n';
    }
  };

  for (Mode mode : cfg.modes) {
    out << "== mode " << mode_name(mode) << " ==\n";
    for (Label cls : {Label::Known, Label::Unknown})
      grid(mode, cls,
           [](const CellResult& c) { return detail::format_cell_pct(c.accuracy); },
           "accuracy %");
    if (mode == Mode::Strict || mode == Mode::IncrementalStrict)
      for (Label cls : {Label::Known, Label::Unknown})
        grid(mode, cls,
             [](const CellResult& c) {
               return detail::format_cell_pct(c.uncertain_rate);
             },
             "uncertain %");
    if (detail::is_incremental(mode))
      for (Label cls : {Label::Known, Label::Unknown})
        grid(mode, cls,
             [](const CellResult& c) {
               return detail::format_cell_pct(c.mean_fraction_to_decision);
             },
             "mean subflows to decision %");
    out << '\n';
  }
  return out.str();
}

}  // namespace flowsift
