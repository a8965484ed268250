#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect_router/context.hpp"
#include "affect_router/emotion_model.hpp"
#include "affect_router/road_graph.hpp"

namespace affect_router {

enum class WeightMode : std::uint8_t { fastest, happy_linear, happy_reciprocal, paper_literal };

std::string_view to_string(WeightMode mode) noexcept;
WeightMode parse_weight_mode(std::string_view name);

struct WeightParams {
  WeightMode mode = WeightMode::happy_linear;
  double lambda = 20.0;

  void validate() const;
  friend bool operator==(const WeightParams&, const WeightParams&) = default;
};

/// Floor applied to stored base times so every edge weight is strictly positive.
inline constexpr double kMinBaseTimeS = 1e-3;

struct EdgeEmotion {
  EdgeId edge_id = 0;
  double e = kHappyWeightFloor;
  double c = kHappyWeightFloor;
  double base_time_s = kMinBaseTimeS;

  void validate() const;
  friend bool operator==(const EdgeEmotion&, const EdgeEmotion&) = default;
};

struct LayerMetadata {
  std::string built_at;
  std::string model_id;
  std::uint64_t provider_epoch = 0;

  friend bool operator==(const LayerMetadata&, const LayerMetadata&) = default;
};

/// Per-edge happiness values for one graph, indexed by edge id.
class EmotionLayer {
 public:
  EmotionLayer() = default;
  EmotionLayer(std::uint64_t graph_fingerprint, std::vector<EdgeEmotion> edges, LayerMetadata metadata);

  std::uint64_t graph_fingerprint() const noexcept { return fingerprint_; }
  std::span<const EdgeEmotion> edges() const noexcept { return edges_; }
  const EdgeEmotion& operator[](EdgeId id) const { return edges_.at(id); }
  std::size_t size() const noexcept { return edges_.size(); }
  const LayerMetadata& metadata() const noexcept { return metadata_; }

  /// Throws ValidationError("layer does not match graph") on mismatch.
  void check_matches(const RoadGraph& graph) const;

  friend bool operator==(const EmotionLayer&, const EmotionLayer&) = default;

 private:
  std::uint64_t fingerprint_ = 0;
  std::vector<EdgeEmotion> edges_;
  LayerMetadata metadata_;
};

/// Rounds to 9 significant digits, the precision the layer file stores.
double quantize9(double value);

/// Scores every edge: snapshot -> distribution -> (e, c), plus base travel time.
/// A provider failure aborts with a ProviderError that names the edge.
EmotionLayer build_layer(const RoadGraph& graph, const ProviderSet& providers, const EmotionScorer& scorer,
                         const PersonalProfile& profile, const LocalTimestamp& at, ContextCache* cache = nullptr);

/// fastest: d; happy_linear: d(1 + lambda(1 - ec)); happy_reciprocal: d / (1 + lambda ec);
/// paper_literal: d / (lambda ec).
double edge_weight(double d, double e, double c, const WeightParams& params);

/// Per-edge weights aligned with edge ids.
class WeightedView {
 public:
  WeightedView() = default;
  WeightedView(std::uint64_t graph_fingerprint, WeightParams params, std::vector<double> weights);

  std::span<const double> weights() const noexcept { return weights_; }
  double operator[](EdgeId id) const noexcept { return weights_[id]; }
  std::size_t size() const noexcept { return weights_.size(); }
  const WeightParams& params() const noexcept { return params_; }
  std::uint64_t graph_fingerprint() const noexcept { return graph_fingerprint_; }
  /// Hash over graph fingerprint, params and the exact weight bits.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

 private:
  std::uint64_t graph_fingerprint_ = 0;
  WeightParams params_;
  std::vector<double> weights_;
  std::uint64_t fingerprint_ = 0;
};

WeightedView apply_weights(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params);
/// Free-flow travel times from max speeds; used when no layer is loaded.
WeightedView travel_time_view(const RoadGraph& graph);

std::string layer_to_csv(const EmotionLayer& layer);
/// Parses and validates against graph: row count, ids, and fingerprint.
EmotionLayer layer_from_csv(std::string_view text, const RoadGraph& graph);
void save_layer(const EmotionLayer& layer, const std::filesystem::path& path);
EmotionLayer load_layer(const std::filesystem::path& path, const RoadGraph& graph);

}  // namespace affect_router
