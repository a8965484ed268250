#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "affect_router/context.hpp"

namespace affect_router {

inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr int kModelFormatVersion = 1;

// Feature layout: 9 numeric features, then one-hot blocks.
inline constexpr std::size_t kNumericFeatureCount = 9;
inline constexpr std::size_t kWeatherTermOffset = kNumericFeatureCount;
inline constexpr std::size_t kRoadTypeOffset = kWeatherTermOffset + kWeatherTermCount;
inline constexpr std::size_t kDaytimeOffset = kRoadTypeOffset + kRoadTypeCount;
inline constexpr std::size_t kBeforeEmotionOffset = kDaytimeOffset + kDaytimeCount;
inline constexpr std::size_t kFeatureCount = kBeforeEmotionOffset + kEmotionCount;
static_assert(kFeatureCount == 35);

enum class NumericFeature : std::uint8_t {
  feeltemp_outside,
  windspeed,
  cloud_coverage,
  reducedspeed,
  freeflow_speed,
  max_speed,
  n_lanes,
  satellite_greeness,
  age,
};

/// Column names in schema order, one-hot columns as "<group>=<value>".
const std::array<std::string, kFeatureCount>& feature_names();

struct FeatureVector {
  int schema_version = kFeatureSchemaVersion;
  std::array<double, kFeatureCount> values{};

  double operator[](NumericFeature f) const noexcept { return values[static_cast<std::size_t>(f)]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Unknown max_speed falls back to the road-type default, unknown n_lanes to 1.
FeatureVector encode_features(const ContextSnapshot& snapshot, const SpeedDefaults& defaults = {});

using ClassProbabilities = std::array<double, kEmotionCount>;

struct EmotionDistribution {
  ClassProbabilities p{};

  double operator[](Emotion e) const noexcept { return p[static_cast<std::size_t>(e)]; }
  /// Throws unless every p is in [0,1] and the sum is 1 within 1e-9.
  void validate() const;

  static EmotionDistribution uniform() noexcept;
  static EmotionDistribution delta(Emotion e) noexcept;
  friend bool operator==(const EmotionDistribution&, const EmotionDistribution&) = default;
};

struct SplitNode {
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;

  friend bool operator==(const SplitNode&, const SplitNode&) = default;
};

struct LeafNode {
  ClassProbabilities p{};

  friend bool operator==(const LeafNode&, const LeafNode&) = default;
};

using TreeNode = std::variant<SplitNode, LeafNode>;

/// Array-encoded binary tree; node 0 is the root. A sample goes left when
/// value <= threshold.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const LeafNode& leaf_for(std::span<const double> features) const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct DecisionForest {
  std::vector<DecisionTree> trees;
  int schema_version = kFeatureSchemaVersion;

  /// Checks feature indices, acyclicity, reachability of leaves, and leaf distributions.
  void validate() const;
  /// Stable identifier derived from the serialized model.
  std::string id() const;
  friend bool operator==(const DecisionForest&, const DecisionForest&) = default;
};

/// Uniform average of the leaf distributions reached in each tree.
EmotionDistribution predict_distribution(const DecisionForest& forest, const FeatureVector& features);

inline constexpr double kHappyWeightFloor = 0.01;

struct HappyWeight {
  double e = kHappyWeightFloor;  // happiness pseudo-likelihood
  double c = kHappyWeightFloor;  // confidence: top-class pseudo-likelihood
};

HappyWeight happy_weight(const EmotionDistribution& dist);

/// JSON model format: format_version, schema_version, class_labels, trees.
DecisionForest load_model(std::string_view bytes);
std::string save_model(const DecisionForest& forest);
DecisionForest load_model_file(const std::filesystem::path& path);

/// Rule-based stand-in used when no trained forest is available.
EmotionDistribution heuristic_scorer(const ContextSnapshot& snapshot);

/// Either a forest or the heuristic.
class EmotionScorer {
 public:
  EmotionScorer() = default;  // heuristic
  explicit EmotionScorer(std::shared_ptr<const DecisionForest> forest);

  EmotionDistribution score(const ContextSnapshot& snapshot) const;
  std::string id() const;
  bool is_heuristic() const noexcept { return forest_ == nullptr; }

 private:
  std::shared_ptr<const DecisionForest> forest_;
  SpeedDefaults defaults_;
};

}  // namespace affect_router
