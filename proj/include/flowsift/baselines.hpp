#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "flowsift/gbdt.hpp"

namespace flowsift {

/// Gaussian naive Bayes: per-class per-feature normal fit (population
/// variance, floored at 1e-12) with class priors from the data.
struct NbModel {
  FeatureSchema schema = FeatureSchema::Core8;
  double log_prior_known = 0.0;
  double log_prior_unknown = 0.0;
  std::vector<double> mean_known, var_known;
  std::vector<double> mean_unknown, var_unknown;
};

inline constexpr double kNbVarianceFloor = 1e-12;

inline NbModel train_nb(const LabeledDataset& data) {
  if (data.vectors.empty()) throw Error("cannot train on an empty dataset");
  const std::size_t d = schema_arity(data.schema);
  NbModel m;
  m.schema = data.schema;
  m.mean_known.assign(d, 0.0);
  m.var_known.assign(d, 0.0);
  m.mean_unknown.assign(d, 0.0);
  m.var_unknown.assign(d, 0.0);

  std::size_t n_k = 0, n_u = 0;
  for (const FeatureVector& fv : data.vectors) {
    for (double v : fv.values)
      if (!std::isfinite(v)) throw Error("non-finite feature value");
    bool unknown = fv.label == Label::Unknown;
    if (!unknown && fv.label != Label::Known)
      throw Error("training vectors must be labeled known or unknown");
    auto& mean = unknown ? m.mean_unknown : m.mean_known;
    for (std::size_t f = 0; f < d; ++f) mean[f] += fv.values[f];
    (unknown ? n_u : n_k) += 1;
  }
  if (n_k == 0 || n_u == 0)
    throw Error("training data must contain both known and unknown labels");
  for (std::size_t f = 0; f < d; ++f) {
    m.mean_known[f] /= static_cast<double>(n_k);
    m.mean_unknown[f] /= static_cast<double>(n_u);
  }
  for (const FeatureVector& fv : data.vectors) {
    bool unknown = fv.label == Label::Unknown;
    auto& mean = unknown ? m.mean_unknown : m.mean_known;
    auto& var = unknown ? m.var_unknown : m.var_known;
    for (std::size_t f = 0; f < d; ++f) {
      double dv = fv.values[f] - mean[f];
      var[f] += dv * dv;
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    m.var_known[f] =
        std::max(m.var_known[f] / static_cast<double>(n_k), kNbVarianceFloor);
    m.var_unknown[f] =
        std::max(m.var_unknown[f] / static_cast<double>(n_u), kNbVarianceFloor);
  }
  double n = static_cast<double>(n_k + n_u);
  m.log_prior_known = std::log(static_cast<double>(n_k) / n);
  m.log_prior_unknown = std::log(static_cast<double>(n_u) / n);
  return m;
}

inline SubflowPrediction predict_nb(const NbModel& m, const FeatureVector& v) {
  if (v.schema != m.schema) throw Error("feature schema mismatch");
  double lp_k = m.log_prior_known;
  double lp_u = m.log_prior_unknown;
  constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)
  for (std::size_t f = 0; f < v.values.size(); ++f) {
    double x = v.values[f];
    double dk = x - m.mean_known[f];
    double du = x - m.mean_unknown[f];
    lp_k -= 0.5 * (kLog2Pi + std::log(m.var_known[f]) +
                   dk * dk / m.var_known[f]);
    lp_u -= 0.5 * (kLog2Pi + std::log(m.var_unknown[f]) +
                   du * du / m.var_unknown[f]);
  }
  // P(unknown | x) via the log-sum-exp of the two joint densities.
  double score = detail::sigmoid(lp_u - lp_k);
  return {score >= 0.5 ? Label::Unknown : Label::Known, score};
}

inline SubflowPrediction train_predict_nb(const LabeledDataset& data,
                                          const FeatureVector& v) {
  return predict_nb(train_nb(data), v);
}

/// KNN over z-score-standardized features. Standardization constants come
/// from the training data; constant features are neutralized (sd set to 1).
struct KnnIndex {
  FeatureSchema schema = FeatureSchema::Core8;
  std::size_t dims = 0;
  std::vector<double> mean, sd;
  std::vector<double> points;  // row-major standardized matrix, n x dims
  std::vector<Label> labels;

  std::size_t size() const { return labels.size(); }
};

inline KnnIndex build_knn_index(const LabeledDataset& data) {
  if (data.vectors.empty()) throw Error("cannot index an empty dataset");
  const std::size_t d = schema_arity(data.schema);
  const std::size_t n = data.vectors.size();
  KnnIndex idx;
  idx.schema = data.schema;
  idx.dims = d;
  idx.mean.assign(d, 0.0);
  idx.sd.assign(d, 0.0);
  for (const FeatureVector& fv : data.vectors)
    for (std::size_t f = 0; f < d; ++f) idx.mean[f] += fv.values[f];
  for (std::size_t f = 0; f < d; ++f) idx.mean[f] /= static_cast<double>(n);
  for (const FeatureVector& fv : data.vectors)
    for (std::size_t f = 0; f < d; ++f) {
      double dv = fv.values[f] - idx.mean[f];
      idx.sd[f] += dv * dv;
    }
  for (std::size_t f = 0; f < d; ++f) {
    idx.sd[f] = std::sqrt(idx.sd[f] / static_cast<double>(n));
    if (idx.sd[f] < 1e-12) idx.sd[f] = 1.0;
  }
  idx.points.resize(n * d);
  idx.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector& fv = data.vectors[i];
    if (fv.label != Label::Known && fv.label != Label::Unknown)
      throw Error("training vectors must be labeled known or unknown");
    for (std::size_t f = 0; f < d; ++f)
      idx.points[i * d + f] = (fv.values[f] - idx.mean[f]) / idx.sd[f];
    idx.labels.push_back(fv.label);
  }
  return idx;
}

/// Majority label of the k nearest neighbors (Euclidean distance on
/// standardized features); score is the unknown fraction among them and
/// distance ties resolve to the earlier training point.
inline SubflowPrediction knn_predict(const KnnIndex& idx,
                                     const FeatureVector& v, int k = 3) {
  if (v.schema != idx.schema) throw Error("feature schema mismatch");
  if (k < 1) throw Error("k must be >= 1");
  if (static_cast<std::size_t>(k) > idx.size())
    throw Error("k exceeds the number of training points");
  const std::size_t d = idx.dims;
  std::vector<double> q(d);
  for (std::size_t f = 0; f < d; ++f)
    q[f] = (v.values[f] - idx.mean[f]) / idx.sd[f];

  // (distance^2, index) pairs; nth_element keeps the k nearest.
  std::vector<std::pair<double, std::size_t>> dist(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double s = 0.0;
    const double* row = idx.points.data() + i * d;
    for (std::size_t f = 0; f < d; ++f) {
      double dv = q[f] - row[f];
      s += dv * dv;
    }
    dist[i] = {s, i};
  }
  std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
  std::size_t unknown_votes = 0;
  for (int i = 0; i < k; ++i)
    if (idx.labels[dist[static_cast<std::size_t>(i)].second] == Label::Unknown)
      ++unknown_votes;
  double score = static_cast<double>(unknown_votes) / static_cast<double>(k);
  // An even k can tie at 0.5; ties break toward unknown.
  return {score >= 0.5 ? Label::Unknown : Label::Known, score};
}

inline SubflowPrediction knn_predict(const LabeledDataset& data,
                                     const FeatureVector& v, int k = 3) {
  return knn_predict(build_knn_index(data), v, k);
}

}  // namespace flowsift
