#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "flowsift/gbdt.hpp"
#include "flowsift/likelihood.hpp"

namespace flowsift {

inline constexpr int kModelFormatVersion = 1;

/// Capture-processing settings frozen at training time so classification can
/// segment the same way the model was trained.
struct PipelineInfo {
  std::uint32_t subflow_n = 100;
  bool bidirectional = true;
  std::uint64_t idle_timeout_us = 60'000'000;
};

/// The trained GBDT plus the calibrated likelihood table it ships with.
struct ModelBundle {
  GbdtModel model;
  std::optional<LikelihoodTable> likelihood;
  std::optional<PipelineInfo> pipeline;
};

namespace detail {

inline nlohmann::json tree_to_json(const RegressionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& n : tree.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right}});
    }
  }
  return nodes;
}

inline RegressionTree tree_from_json(const nlohmann::json& j,
                                     std::size_t arity) {
  if (!j.is_array() || j.empty())
    throw Error("model file: tree must be a non-empty node array");
  RegressionTree tree;
  int count = static_cast<int>(j.size());
  for (const auto& nj : j) {
    TreeNode n;
    if (nj.contains("value")) {
      n.value = nj.at("value").get<double>();
    } else {
      n.feature = nj.at("feature").get<int>();
      n.threshold = nj.at("threshold").get<double>();
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= arity)
        throw Error("model file: node feature index out of range");
      if (n.left < 0 || n.left >= count || n.right < 0 || n.right >= count)
        throw Error("model file: node child index out of range");
    }
    tree.nodes.push_back(n);
  }
  return tree;
}

}  // namespace detail

inline nlohmann::json bundle_to_json(const ModelBundle& bundle) {
  const GbdtModel& m = bundle.model;
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["model_type"] = "gbdt";
  j["schema"] = std::string(schema_name(m.schema));
  j["params"] = {{"trees", m.params.trees},
                 {"max_depth", m.params.max_depth},
                 {"learning_rate", m.params.learning_rate},
                 {"min_leaf", m.params.min_leaf},
                 {"seed", m.params.seed}};
  j["base_score"] = m.base_score;
  nlohmann::json trees = nlohmann::json::array();
  for (const RegressionTree& t : m.trees)
    trees.push_back(detail::tree_to_json(t));
  j["trees"] = std::move(trees);
  if (bundle.likelihood) {
    const LikelihoodTable& t = *bundle.likelihood;
    j["likelihood"] = {{"p_kk", t.p_kk},
                       {"p_ku", t.p_ku},
                       {"p_uk", t.p_uk},
                       {"p_uu", t.p_uu},
                       {"alpha", t.smoothing_alpha}};
  }
  if (bundle.pipeline) {
    const PipelineInfo& p = *bundle.pipeline;
    j["pipeline"] = {{"subflow_n", p.subflow_n},
                     {"bidirectional", p.bidirectional},
                     {"idle_timeout_us", p.idle_timeout_us}};
  }
  return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j,
                                    const std::string& origin) {
  try {
    if (!j.contains("format_version") ||
        j.at("format_version").get<int>() != kModelFormatVersion)
      throw Error("unsupported or missing format_version (expected " +
                  std::to_string(kModelFormatVersion) + ")");
    if (j.at("model_type").get<std::string>() != "gbdt")
      throw Error("unsupported model_type");
    ModelBundle bundle;
    GbdtModel& m = bundle.model;
    m.schema = parse_schema(j.at("schema").get<std::string>());
    const auto& pj = j.at("params");
    m.params.trees = pj.at("trees").get<int>();
    m.params.max_depth = pj.at("max_depth").get<int>();
    m.params.learning_rate = pj.at("learning_rate").get<double>();
    m.params.min_leaf = pj.at("min_leaf").get<int>();
    m.params.seed = pj.at("seed").get<std::uint64_t>();
    m.base_score = j.at("base_score").get<double>();
    for (const auto& tj : j.at("trees"))
      m.trees.push_back(detail::tree_from_json(tj, schema_arity(m.schema)));
    if (j.contains("likelihood")) {
      const auto& lj = j.at("likelihood");
      LikelihoodTable t;
      t.p_kk = lj.at("p_kk").get<double>();
      t.p_ku = lj.at("p_ku").get<double>();
      t.p_uk = lj.at("p_uk").get<double>();
      t.p_uu = lj.at("p_uu").get<double>();
      t.smoothing_alpha = lj.at("alpha").get<double>();
      bundle.likelihood = t;
    }
    if (j.contains("pipeline")) {
      const auto& pl = j.at("pipeline");
      PipelineInfo p;
      p.subflow_n = pl.at("subflow_n").get<std::uint32_t>();
      p.bidirectional = pl.at("bidirectional").get<bool>();
      p.idle_timeout_us = pl.at("idle_timeout_us").get<std::uint64_t>();
      bundle.pipeline = p;
    }
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw Error(origin + ": invalid model document: " + e.what());
  }
}

inline std::string bundle_to_string(const ModelBundle& bundle) {
  return bundle_to_json(bundle).dump(2) + "\n";
}

inline void save_bundle(const ModelBundle& bundle,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << bundle_to_string(bundle);
  if (!out) throw Error("write failed: " + path.string());
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": not a valid model document: " + e.what());
  }
  return bundle_from_json(j, path.string());
}

inline void save_model(const GbdtModel& model,
                       const std::filesystem::path& path) {
  save_bundle(ModelBundle{model, std::nullopt, std::nullopt}, path);
}

inline GbdtModel load_model(const std::filesystem::path& path) {
  return load_bundle(path).model;
}

}  // namespace flowsift
