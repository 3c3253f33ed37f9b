#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flowsift/features.hpp"
#include "flowsift/types.hpp"

namespace flowsift {

/// Subflow-level training set. All vectors must share one schema and carry a
/// known or unknown label; training requires both labels present.
struct LabeledDataset {
  FeatureSchema schema = FeatureSchema::Core8;
  std::vector<FeatureVector> vectors;
};

inline LabeledDataset make_dataset(std::vector<FeatureVector> vectors) {
  if (vectors.empty()) throw Error("dataset is empty");
  LabeledDataset d;
  d.schema = vectors.front().schema;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const FeatureVector& fv = vectors[i];
    if (fv.schema != d.schema)
      throw Error("dataset mixes feature schemas");
    if (fv.label != Label::Known && fv.label != Label::Unknown)
      throw Error("vector " + std::to_string(i) + " (" +
                  to_string(fv.subflow_ref.flow_key) + "#" +
                  std::to_string(fv.subflow_ref.index) +
                  ") is unlabeled");
    for (double v : fv.values)
      if (!std::isfinite(v))
        throw Error("vector " + std::to_string(i) + " (" +
                    to_string(fv.subflow_ref.flow_key) + "#" +
                    std::to_string(fv.subflow_ref.index) +
                    ") has a non-finite feature value");
  }
  d.vectors = std::move(vectors);
  return d;
}

struct GbdtParams {
  int trees = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_leaf = 5;
  std::uint64_t seed = 0;  // recorded for reproducibility; exact greedy
                           // training draws no random numbers

  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

/// One node of a regression tree. Split rule: go left when
/// x[feature] <= threshold; threshold is an observed training value, so
/// predictions are invariant under monotone re-encodings of a feature.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value (unscaled; learning rate applied on use)

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

/// Additive ensemble of shallow regression trees for binary logistic loss.
/// Class "unknown" is the positive class; base_score is its log-odds prior.
struct GbdtModel {
  FeatureSchema schema = FeatureSchema::Core8;
  GbdtParams params;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;

  double margin(std::span<const double> x) const {
    double sum = 0.0;
    for (const RegressionTree& t : trees) sum += t.predict(x);
    return base_score + params.learning_rate * sum;
  }
};

struct SubflowPrediction {
  Label label;   // known or unknown; unknown iff score >= 0.5
  double score;  // probability of class "unknown"
};

namespace detail {

inline double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  double e = std::exp(m);
  return e / (1.0 + e);
}

// Newton leaf value clamped so a default learning-rate step cannot overshoot.
inline constexpr double kLeafClamp = 10.0;
inline constexpr double kMinGain = 1e-12;

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t left_count = 0;
};

// Best squared-error split of the gradient over one feature's sorted order.
inline void scan_feature(std::span<const int> order,
                         std::span<const double> value,
                         std::span<const double> grad, double sum_g,
                         int feature, int min_leaf, SplitCandidate& best) {
  const std::size_t n = order.size();
  double left_g = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    int idx = order[i];
    left_g += grad[static_cast<std::size_t>(idx)];
    double v = value[static_cast<std::size_t>(idx)];
    double v_next = value[static_cast<std::size_t>(order[i + 1])];
    if (v == v_next) continue;  // identical values cannot be separated
    std::size_t nl = i + 1;
    std::size_t nr = n - nl;
    if (nl < static_cast<std::size_t>(min_leaf) ||
        nr < static_cast<std::size_t>(min_leaf))
      continue;
    double right_g = sum_g - left_g;
    double gain = left_g * left_g / static_cast<double>(nl) +
                  right_g * right_g / static_cast<double>(nr) -
                  sum_g * sum_g / static_cast<double>(n);
    if (gain > best.gain + kMinGain ||
        (!best.found && gain > kMinGain)) {
      best.found = true;
      best.feature = feature;
      best.threshold = v;  // observed left-side value; rule is x <= threshold
      best.gain = gain;
      best.left_count = nl;
    }
  }
}

}  // namespace detail

/// Boosted training: base score from the class prior, then per round a
/// regression tree fit to the logistic-loss negative gradients with exact
/// greedy splits on sorted feature values and per-leaf Newton values.
/// Deterministic given (data order, params).
inline GbdtModel train_gbdt(const LabeledDataset& data,
                            const GbdtParams& params = {}) {
  if (data.vectors.empty()) throw Error("cannot train on an empty dataset");
  if (params.trees < 0) throw Error("tree count must be >= 0");
  if (params.max_depth < 1) throw Error("max depth must be >= 1");
  if (params.min_leaf < 1) throw Error("min leaf size must be >= 1");
  if (!(params.learning_rate > 0.0))
    throw Error("learning rate must be > 0");

  const std::size_t n = data.vectors.size();
  const std::size_t d = schema_arity(data.schema);

  // Columnar copy plus 0/1 targets (unknown = 1).
  std::vector<std::vector<double>> col(d, std::vector<double>(n));
  std::vector<double> y(n);
  std::size_t n_unknown = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector& fv = data.vectors[i];
    if (fv.values.size() != d)
      throw Error("vector " + std::to_string(i) + " has wrong arity");
    for (std::size_t f = 0; f < d; ++f) {
      if (!std::isfinite(fv.values[f]))
        throw Error("vector " + std::to_string(i) + " (" +
                    to_string(fv.subflow_ref.flow_key) + "#" +
                    std::to_string(fv.subflow_ref.index) +
                    ") has a non-finite feature value");
      col[f][i] = fv.values[f];
    }
    if (fv.label == Label::Unknown) {
      y[i] = 1.0;
      ++n_unknown;
    } else if (fv.label == Label::Known) {
      y[i] = 0.0;
    } else {
      throw Error("vector " + std::to_string(i) + " is unlabeled");
    }
  }
  if (n_unknown == 0 || n_unknown == n)
    throw Error("training data must contain both known and unknown labels");

  GbdtModel model;
  model.schema = data.schema;
  model.params = params;
  model.base_score = std::log(static_cast<double>(n_unknown) /
                              static_cast<double>(n - n_unknown));

  // Per-feature argsort, computed once; feature values never change.
  std::vector<std::vector<int>> sorted(d, std::vector<int>(n));
  for (std::size_t f = 0; f < d; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&vals = col[f]](int a, int b) {
                       return vals[static_cast<std::size_t>(a)] <
                              vals[static_cast<std::size_t>(b)];
                     });
  }

  std::vector<double> margin(n, model.base_score);
  std::vector<double> grad(n), hess(n);

  struct BuildItem {
    int node = 0;
    int depth = 0;
    std::vector<std::vector<int>> order;  // per-feature sorted member indices
  };

  for (int round = 0; round < params.trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double p = detail::sigmoid(margin[i]);
      grad[i] = y[i] - p;  // negative gradient of logistic loss
      hess[i] = p * (1.0 - p);
    }

    RegressionTree tree;
    std::vector<BuildItem> stack;
    BuildItem root;
    root.order = sorted;
    tree.nodes.emplace_back();
    stack.push_back(std::move(root));

    while (!stack.empty()) {
      BuildItem item = std::move(stack.back());
      stack.pop_back();
      const std::vector<int>& members = item.order[0];
      const std::size_t m = members.size();

      double sum_g = 0.0, sum_h = 0.0;
      for (int idx : members) {
        sum_g += grad[static_cast<std::size_t>(idx)];
        sum_h += hess[static_cast<std::size_t>(idx)];
      }

      detail::SplitCandidate best;
      if (item.depth < params.max_depth &&
          m >= 2 * static_cast<std::size_t>(params.min_leaf)) {
        for (std::size_t f = 0; f < d; ++f)
          detail::scan_feature(item.order[f], col[f], grad, sum_g,
                               static_cast<int>(f), params.min_leaf, best);
      }

      TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];
      if (!best.found) {
        double value = sum_g / (sum_h + 1e-16);
        node.value = std::clamp(value, -detail::kLeafClamp,
                                detail::kLeafClamp);
        continue;
      }

      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      const std::vector<double>& split_col =
          col[static_cast<std::size_t>(best.feature)];
      BuildItem left, right;
      left.node = tree.nodes[static_cast<std::size_t>(item.node)].left;
      right.node = tree.nodes[static_cast<std::size_t>(item.node)].right;
      left.depth = right.depth = item.depth + 1;
      left.order.resize(d);
      right.order.resize(d);
      for (std::size_t f = 0; f < d; ++f) {
        left.order[f].reserve(best.left_count);
        right.order[f].reserve(m - best.left_count);
        for (int idx : item.order[f]) {
          if (split_col[static_cast<std::size_t>(idx)] <= best.threshold)
            left.order[f].push_back(idx);
          else
            right.order[f].push_back(idx);
        }
      }
      stack.push_back(std::move(left));
      stack.push_back(std::move(right));
    }

    for (std::size_t i = 0; i < n; ++i) {
      int node = 0;
      while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& tn = tree.nodes[static_cast<std::size_t>(node)];
        node = col[static_cast<std::size_t>(tn.feature)][i] <= tn.threshold
                   ? tn.left
                   : tn.right;
      }
      margin[i] += params.learning_rate *
                   tree.nodes[static_cast<std::size_t>(node)].value;
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline SubflowPrediction predict_margin_to_prediction(double m) {
  double score = detail::sigmoid(m);
  return {score >= 0.5 ? Label::Unknown : Label::Known, score};
}

inline SubflowPrediction predict_gbdt(const GbdtModel& model,
                                      const FeatureVector& v) {
  if (v.schema != model.schema)
    throw Error("feature schema mismatch: model expects " +
                std::string(schema_name(model.schema)) + ", vector is " +
                std::string(schema_name(v.schema)));
  return predict_margin_to_prediction(model.margin(v.values));
}

}  // namespace flowsift
