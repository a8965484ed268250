#include "affect_router/emotion_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <nlohmann/json.hpp>

#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

using nlohmann::json;

const std::array<std::string, kFeatureCount>& feature_names() {
  static const auto names = [] {
    std::array<std::string, kFeatureCount> out;
    const std::array<std::string, kNumericFeatureCount> numeric = {
        "feeltemp_outside", "windspeed", "cloud_coverage",     "reducedspeed", "freeflow_speed",
        "max_speed",        "n_lanes",   "satellite_greeness", "age"};
    std::copy(numeric.begin(), numeric.end(), out.begin());
    for (std::size_t i = 0; i < kWeatherTermCount; ++i) {
      out[kWeatherTermOffset + i] = "weather_term=" + std::string(to_string(static_cast<WeatherTerm>(i)));
    }
    for (std::size_t i = 0; i < kRoadTypeCount; ++i) {
      out[kRoadTypeOffset + i] = "road_type=" + std::string(to_string(static_cast<RoadType>(i)));
    }
    for (std::size_t i = 0; i < kDaytimeCount; ++i) {
      out[kDaytimeOffset + i] = "daytime=" + std::string(to_string(static_cast<Daytime>(i)));
    }
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      out[kBeforeEmotionOffset + i] = "before_emotion=" + std::string(to_string(static_cast<Emotion>(i)));
    }
    return out;
  }();
  return names;
}

FeatureVector encode_features(const ContextSnapshot& s, const SpeedDefaults& defaults) {
  FeatureVector fv;
  auto& v = fv.values;
  v[static_cast<std::size_t>(NumericFeature::feeltemp_outside)] = s.weather.feeltemp_outside;
  v[static_cast<std::size_t>(NumericFeature::windspeed)] = s.weather.windspeed;
  v[static_cast<std::size_t>(NumericFeature::cloud_coverage)] = s.weather.cloud_coverage;
  v[static_cast<std::size_t>(NumericFeature::reducedspeed)] = s.traffic.reducedspeed;
  v[static_cast<std::size_t>(NumericFeature::freeflow_speed)] = s.traffic.freeflow_speed;
  v[static_cast<std::size_t>(NumericFeature::max_speed)] = s.max_speed.value_or(defaults[s.road_type]);
  v[static_cast<std::size_t>(NumericFeature::n_lanes)] = s.n_lanes.value_or(1);
  v[static_cast<std::size_t>(NumericFeature::satellite_greeness)] = s.satellite_greeness;
  v[static_cast<std::size_t>(NumericFeature::age)] = s.personal.age;
  v[kWeatherTermOffset + static_cast<std::size_t>(s.weather.weather_term)] = 1.0;
  v[kRoadTypeOffset + static_cast<std::size_t>(s.road_type)] = 1.0;
  v[kDaytimeOffset + static_cast<std::size_t>(s.daytime)] = 1.0;
  v[kBeforeEmotionOffset + static_cast<std::size_t>(s.personal.before_emotion)] = 1.0;
  return fv;
}

namespace {

void validate_probabilities(const ClassProbabilities& p, const char* what) {
  double sum = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw ValidationError(std::string(what) + ": probability outside [0,1]");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError(std::string(what) + ": probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

void EmotionDistribution::validate() const { validate_probabilities(p, "distribution"); }

EmotionDistribution EmotionDistribution::uniform() noexcept {
  EmotionDistribution d;
  d.p.fill(1.0 / kEmotionCount);
  return d;
}

EmotionDistribution EmotionDistribution::delta(Emotion e) noexcept {
  EmotionDistribution d;
  d.p[static_cast<std::size_t>(e)] = 1.0;
  return d;
}

const LeafNode& DecisionTree::leaf_for(std::span<const double> features) const {
  std::size_t index = 0;
  // A validated tree reaches a leaf in at most nodes.size() steps.
  for (std::size_t steps = 0; steps <= nodes.size(); ++steps) {
    const TreeNode& node = nodes.at(index);
    if (const auto* leaf = std::get_if<LeafNode>(&node)) return *leaf;
    const auto& split = std::get<SplitNode>(node);
    index = features[split.feature] <= split.threshold ? split.left : split.right;
  }
  throw ValidationError("tree walk did not terminate");
}

void DecisionForest::validate() const {
  if (trees.empty()) throw ValidationError("model: forest has no trees");
  if (schema_version != kFeatureSchemaVersion) throw ValidationError("model: unsupported schema_version");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& nodes = trees[t].nodes;
    const std::string where = "model: tree " + std::to_string(t);
    if (nodes.empty()) throw ValidationError(where + " is empty");
    // 0 = unvisited, 1 = on the DFS stack, 2 = done.
    std::vector<std::uint8_t> state(nodes.size(), 0);
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    state[0] = 1;
    while (!stack.empty()) {
      auto& [index, next_child] = stack.back();
      const TreeNode& node = nodes[index];
      if (const auto* leaf = std::get_if<LeafNode>(&node)) {
        validate_probabilities(leaf->p, (where + " leaf " + std::to_string(index)).c_str());
        state[index] = 2;
        stack.pop_back();
        continue;
      }
      const auto& split = std::get<SplitNode>(node);
      if (split.feature >= kFeatureCount) {
        throw ValidationError(where + " node " + std::to_string(index) + ": feature index out of range");
      }
      if (!std::isfinite(split.threshold)) {
        throw ValidationError(where + " node " + std::to_string(index) + ": non-finite threshold");
      }
      if (next_child == 2) {
        state[index] = 2;
        stack.pop_back();
        continue;
      }
      const std::uint32_t child = next_child == 0 ? split.left : split.right;
      ++next_child;
      if (child >= nodes.size()) {
        throw ValidationError(where + " node " + std::to_string(index) + ": child index out of range");
      }
      if (state[child] == 1) throw ValidationError(where + ": cyclic child index at node " + std::to_string(index));
      if (state[child] == 0) {
        state[child] = 1;
        stack.emplace_back(child, 0);
      }
    }
  }
}

std::string DecisionForest::id() const { return "forest-" + to_hex(fnv1a64(save_model(*this))); }

EmotionDistribution predict_distribution(const DecisionForest& forest, const FeatureVector& fv) {
  if (fv.schema_version != forest.schema_version) throw ValidationError("feature schema does not match model");
  if (forest.trees.empty()) throw ValidationError("model: forest has no trees");
  ClassProbabilities sum{};
  for (const auto& tree : forest.trees) {
    const auto& leaf = tree.leaf_for(fv.values);
    for (std::size_t k = 0; k < kEmotionCount; ++k) sum[k] += leaf.p[k];
  }
  EmotionDistribution out;
  const double n = static_cast<double>(forest.trees.size());
  for (std::size_t k = 0; k < kEmotionCount; ++k) out.p[k] = sum[k] / n;
  return out;
}

HappyWeight happy_weight(const EmotionDistribution& dist) {
  const double top = *std::max_element(dist.p.begin(), dist.p.end());
  return HappyWeight{std::max(kHappyWeightFloor, dist[Emotion::happy]), std::max(kHappyWeightFloor, top)};
}

DecisionForest load_model(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  DecisionForest forest;
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw ValidationError("model: unsupported format_version");
    }
    forest.schema_version = doc.at("schema_version").get<int>();
    const auto labels = doc.at("class_labels").get<std::vector<std::string>>();
    if (labels.size() != kEmotionCount) throw ValidationError("model: expected 8 class labels");
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      if (labels[i] != to_string(static_cast<Emotion>(i))) {
        throw ValidationError("model: class_labels must be [happy, sad, neutral, angry, contempt, disgust, fear, surprise]");
      }
    }
    for (const auto& jt : doc.at("trees")) {
      DecisionTree tree;
      for (const auto& jn : jt) {
        if (jn.contains("split") == jn.contains("leaf") || jn.size() != 1) {
          throw ValidationError("model: node must be exactly one of split or leaf");
        }
        if (jn.contains("split")) {
          const auto& s = jn["split"];
          tree.nodes.emplace_back(SplitNode{s.at("f").get<std::uint32_t>(), s.at("t").get<double>(),
                                            s.at("l").get<std::uint32_t>(), s.at("r").get<std::uint32_t>()});
        } else {
          const auto p = jn["leaf"].at("p").get<std::vector<double>>();
          if (p.size() != kEmotionCount) throw ValidationError("model: leaf needs 8 probabilities");
          LeafNode leaf;
          std::copy(p.begin(), p.end(), leaf.p.begin());
          tree.nodes.emplace_back(leaf);
        }
      }
      forest.trees.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  forest.validate();
  return forest;
}

std::string save_model(const DecisionForest& forest) {
  json labels = json::array();
  for (std::size_t i = 0; i < kEmotionCount; ++i) labels.push_back(std::string(to_string(static_cast<Emotion>(i))));
  json trees = json::array();
  for (const auto& tree : forest.trees) {
    json jt = json::array();
    for (const auto& node : tree.nodes) {
      if (const auto* split = std::get_if<SplitNode>(&node)) {
        jt.push_back(json{{"split", {{"f", split->feature}, {"t", split->threshold}, {"l", split->left}, {"r", split->right}}}});
      } else {
        const auto& leaf = std::get<LeafNode>(node);
        jt.push_back(json{{"leaf", {{"p", leaf.p}}}});
      }
    }
    trees.push_back(std::move(jt));
  }
  json doc{{"format_version", kModelFormatVersion},
           {"schema_version", forest.schema_version},
           {"class_labels", std::move(labels)},
           {"trees", std::move(trees)}};
  return doc.dump();
}

DecisionForest load_model_file(const std::filesystem::path& path) { return load_model(read_file_maybe_gzip(path)); }

EmotionDistribution heuristic_scorer(const ContextSnapshot& s) {
  const bool calm_road = s.road_type == RoadType::residential || s.road_type == RoadType::tertiary;
  const bool wet = s.weather.weather_term == WeatherTerm::rain || s.weather.weather_term == WeatherTerm::snow;
  const double raw = 0.25 + 0.3 * s.satellite_greeness + 0.2 * std::min(1.0, s.traffic.freeflow_speed / 100.0) +
                     (calm_road ? 0.15 : 0.0) - (wet ? 0.2 : 0.0);
  const double base = std::clamp(raw, 0.0, 1.0);
  EmotionDistribution d;
  const double rest = 1.0 - base;
  const double other = rest * 0.3 / 6.0;
  d.p.fill(other);
  d.p[static_cast<std::size_t>(Emotion::happy)] = base;
  d.p[static_cast<std::size_t>(Emotion::neutral)] = rest * 0.7;
  return d;
}

EmotionScorer::EmotionScorer(std::shared_ptr<const DecisionForest> forest) : forest_(std::move(forest)) {
  if (forest_) forest_->validate();
}

EmotionDistribution EmotionScorer::score(const ContextSnapshot& snapshot) const {
  if (!forest_) return heuristic_scorer(snapshot);
  return predict_distribution(*forest_, encode_features(snapshot, defaults_));
}

std::string EmotionScorer::id() const { return forest_ ? forest_->id() : std::string("heuristic"); }

}  // namespace affect_router
