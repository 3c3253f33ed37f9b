#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "flowsift/gbdt.hpp"
#include "flowsift/model_io.hpp"

using namespace flowsift;
using Catch::Matchers::WithinAbs;

namespace {

FeatureVector vec(std::vector<double> values, Label label) {
  FeatureVector fv;
  fv.schema = FeatureSchema::Core8;
  fv.values = std::move(values);
  fv.values.resize(8, 0.0);
  fv.label = label;
  return fv;
}

// Two Gaussian blobs far apart on two features.
LabeledDataset two_clusters(std::mt19937_64& eng, std::size_t per_class,
                            double separation = 10.0) {
  std::vector<FeatureVector> vecs;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < per_class; ++i) {
    vecs.push_back(vec({noise(eng), noise(eng), noise(eng)}, Label::Known));
    vecs.push_back(vec({separation + noise(eng), separation + noise(eng),
                        noise(eng)},
                       Label::Unknown));
  }
  return make_dataset(std::move(vecs));
}

double dataset_accuracy(const GbdtModel& model, const LabeledDataset& data) {
  std::size_t correct = 0;
  for (const auto& fv : data.vectors)
    if (predict_gbdt(model, fv).label == fv.label) ++correct;
  return static_cast<double>(correct) /
         static_cast<double>(data.vectors.size());
}

double logistic_loss(const GbdtModel& model, const LabeledDataset& data,
                     std::size_t tree_count) {
  double loss = 0.0;
  for (const auto& fv : data.vectors) {
    double m = model.base_score;
    for (std::size_t t = 0; t < tree_count; ++t)
      m += model.params.learning_rate * model.trees[t].predict(fv.values);
    double y = fv.label == Label::Unknown ? 1.0 : 0.0;
    // log(1 + exp(-z)) with the standard stable form
    double z = (2.0 * y - 1.0) * m;
    loss += z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }
  return loss / static_cast<double>(data.vectors.size());
}

}  // namespace

TEST_CASE("gbdt separable clusters train to 100% accuracy") {
  std::mt19937_64 eng(101);
  LabeledDataset data = two_clusters(eng, 100);
  GbdtModel model = train_gbdt(data);
  CHECK(dataset_accuracy(model, data) == 1.0);
}

TEST_CASE("gbdt memorizes a one-point-per-class dataset") {
  LabeledDataset data = make_dataset(
      {vec({0.0, 1.0}, Label::Known), vec({5.0, -3.0}, Label::Unknown)});
  GbdtParams params;
  params.min_leaf = 1;
  GbdtModel model = train_gbdt(data, params);
  CHECK(predict_gbdt(model, data.vectors[0]).label == Label::Known);
  CHECK(predict_gbdt(model, data.vectors[1]).label == Label::Unknown);
}

TEST_CASE("gbdt training is deterministic, byte-identical serialized") {
  std::mt19937_64 eng(103);
  LabeledDataset data = two_clusters(eng, 50);
  GbdtModel a = train_gbdt(data);
  GbdtModel b = train_gbdt(data);
  CHECK(bundle_to_string({a, std::nullopt, std::nullopt}) ==
        bundle_to_string({b, std::nullopt, std::nullopt}));
}

TEST_CASE("gbdt empty ensemble predicts the prior") {
  GbdtModel model;
  model.schema = FeatureSchema::Core8;
  model.base_score = std::log(3.0);  // prior p(unknown) = 0.75
  FeatureVector fv = vec({1, 2, 3}, Label::Unlabeled);
  SubflowPrediction pred = predict_gbdt(model, fv);
  CHECK_THAT(pred.score, WithinAbs(0.75, 1e-12));
  CHECK(pred.label == Label::Unknown);
}

TEST_CASE("gbdt label follows the 0.5 score threshold") {
  std::mt19937_64 eng(107);
  LabeledDataset data = two_clusters(eng, 60, 3.0);
  GbdtModel model = train_gbdt(data);
  for (const auto& fv : data.vectors) {
    SubflowPrediction p = predict_gbdt(model, fv);
    CHECK((p.label == Label::Unknown) == (p.score >= 0.5));
    CHECK(p.score > 0.0);
    CHECK(p.score < 1.0);
  }
}

TEST_CASE("gbdt predictions are invariant under monotone re-encoding") {
  std::mt19937_64 eng(109);
  LabeledDataset data = two_clusters(eng, 80, 3.0);

  // strictly increasing map applied to feature 0 in train and test alike
  auto encode = [](double x) { return x * x * x + 2.0 * x; };
  LabeledDataset encoded = data;
  for (auto& fv : encoded.vectors) fv.values[0] = encode(fv.values[0]);

  GbdtModel m1 = train_gbdt(data);
  GbdtModel m2 = train_gbdt(encoded);

  std::normal_distribution<double> noise(5.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    FeatureVector probe = vec({noise(eng), noise(eng), noise(eng)},
                              Label::Unlabeled);
    FeatureVector probe_enc = probe;
    probe_enc.values[0] = encode(probe.values[0]);
    CHECK(predict_gbdt(m1, probe).score == predict_gbdt(m2, probe_enc).score);
  }
}

TEST_CASE("gbdt held-out accuracy on separable data is >= 0.98") {
  std::mt19937_64 eng(113);
  LabeledDataset train = two_clusters(eng, 300);
  LabeledDataset test = two_clusters(eng, 100);
  GbdtModel model = train_gbdt(train);
  CHECK(dataset_accuracy(model, test) >= 0.98);
}

TEST_CASE("gbdt training loss never increases across rounds") {
  std::mt19937_64 eng(127);
  LabeledDataset data = two_clusters(eng, 100, 1.5);  // overlapping
  GbdtModel model = train_gbdt(data);
  double prev = logistic_loss(model, data, 0);
  for (std::size_t t = 1; t <= model.trees.size(); ++t) {
    double cur = logistic_loss(model, data, t);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("gbdt on identically distributed classes stays near chance") {
  std::mt19937_64 eng(131);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto sample = [&](std::size_t n) {
    std::vector<FeatureVector> vecs;
    for (std::size_t i = 0; i < n; ++i)
      vecs.push_back(vec({noise(eng), noise(eng), noise(eng), noise(eng)},
                         i % 2 ? Label::Unknown : Label::Known));
    return make_dataset(std::move(vecs));
  };
  LabeledDataset train = sample(2000);
  LabeledDataset held_out = sample(2000);
  GbdtModel model = train_gbdt(train);
  double acc = dataset_accuracy(model, held_out);
  CHECK(acc > 0.4);
  CHECK(acc < 0.6);
}

TEST_CASE("gbdt rejects bad training data") {
  CHECK_THROWS_AS(make_dataset({}), Error);

  // single class
  CHECK_THROWS_AS(
      train_gbdt(make_dataset({vec({1}, Label::Known), vec({2}, Label::Known)})),
      Error);

  // non-finite feature named by vector
  FeatureVector bad = vec({1.0}, Label::Known);
  bad.values[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(make_dataset({bad, vec({2}, Label::Unknown)}), Error);

  // unlabeled vector
  CHECK_THROWS_AS(
      make_dataset({vec({1}, Label::Unlabeled), vec({2}, Label::Unknown)}),
      Error);
}

TEST_CASE("gbdt prediction requires a matching schema") {
  std::mt19937_64 eng(137);
  GbdtModel model = train_gbdt(two_clusters(eng, 20));
  FeatureVector wrong;
  wrong.schema = FeatureSchema::Ext14;
  wrong.values.assign(14, 0.0);
  CHECK_THROWS_AS(predict_gbdt(model, wrong), Error);
}
