#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "affect_router/emotion_layer.hpp"
#include "affect_router/road_graph.hpp"

namespace affect_router {

struct Path {
  std::vector<EdgeId> edges;
  double total_weight = 0.0;
  NodeIndex source = 0;
  NodeIndex target = 0;

  bool empty() const noexcept { return edges.empty(); }
  friend bool operator==(const Path&, const Path&) = default;
};

/// Sum of weights along the edge sequence, left to right.
double path_weight(std::span<const EdgeId> edges, const WeightedView& weights) noexcept;

/// Exact shortest path. Ties are broken by fewer edges, then by the
/// lexicographically smallest edge-id sequence. Throws NoRouteError.
Path dijkstra(const RoadGraph& graph, const WeightedView& weights, NodeIndex source, NodeIndex target);

/// Nodes reachable from source, ignoring weights.
std::vector<bool> reachable_from(const RoadGraph& graph, NodeIndex source);

// ---------------------------------------------------------------------------
// Contraction hierarchy

struct CHArc {
  NodeIndex from = 0;
  NodeIndex to = 0;
  double weight = 0.0;
  EdgeId original = kInvalidEdge;        // set for arcs that are graph edges
  std::uint32_t first = 0;               // shortcut halves (arc indices)
  std::uint32_t second = 0;
  NodeIndex middle = kInvalidNode;       // contracted node bridged by a shortcut

  bool is_shortcut() const noexcept { return original == kInvalidEdge; }
  friend bool operator==(const CHArc&, const CHArc&) = default;
};

class CHIndex {
 public:
  CHIndex() = default;
  CHIndex(std::uint64_t graph_fingerprint, std::uint64_t weights_fingerprint, std::vector<std::uint32_t> rank,
          std::vector<CHArc> arcs);

  std::size_t node_count() const noexcept { return rank_.size(); }
  std::span<const std::uint32_t> rank() const noexcept { return rank_; }
  std::span<const CHArc> arcs() const noexcept { return arcs_; }
  std::size_t shortcut_count() const noexcept;
  std::uint64_t graph_fingerprint() const noexcept { return graph_fingerprint_; }
  std::uint64_t weights_fingerprint() const noexcept { return weights_fingerprint_; }

  /// Arcs leaving node towards higher rank.
  std::span<const std::uint32_t> up(NodeIndex node) const noexcept {
    return {up_arcs_.data() + up_offsets_[node], up_arcs_.data() + up_offsets_[node + 1]};
  }
  /// Arcs entering node from higher rank (walked backwards in the reverse search).
  std::span<const std::uint32_t> down(NodeIndex node) const noexcept {
    return {down_arcs_.data() + down_offsets_[node], down_arcs_.data() + down_offsets_[node + 1]};
  }

  /// Expands an arc into original edge ids, in travel order.
  void unpack(std::uint32_t arc, std::vector<EdgeId>& out) const;

  friend bool operator==(const CHIndex& a, const CHIndex& b) {
    return a.graph_fingerprint_ == b.graph_fingerprint_ && a.weights_fingerprint_ == b.weights_fingerprint_ &&
           a.rank_ == b.rank_ && a.arcs_ == b.arcs_;
  }

 private:
  std::uint64_t graph_fingerprint_ = 0;
  std::uint64_t weights_fingerprint_ = 0;
  std::vector<std::uint32_t> rank_;
  std::vector<CHArc> arcs_;
  std::vector<std::uint32_t> up_offsets_{0};
  std::vector<std::uint32_t> up_arcs_;
  std::vector<std::uint32_t> down_offsets_{0};
  std::vector<std::uint32_t> down_arcs_;
};

/// Contracts nodes by priority (edge difference + contracted neighbours, lazy
/// updates, ties by node index) with unbounded witness searches.
CHIndex ch_preprocess(const RoadGraph& graph, const WeightedView& weights);

/// Bidirectional upward search; the returned path holds original edges and its
/// weight is re-summed over them. Throws NoRouteError.
Path ch_query(const CHIndex& index, const WeightedView& weights, NodeIndex source, NodeIndex target);

/// Binary sidecar; load rejects files built for other weights.
void save_ch(const CHIndex& index, const std::filesystem::path& path);
CHIndex load_ch(const std::filesystem::path& path, const WeightedView& weights);

// ---------------------------------------------------------------------------
// Routes

struct RouteEdge {
  EdgeId edge_id = 0;
  double e = 0.0;
  double c = 0.0;
  RoadType road_type = RoadType::unclassified;
  double base_time_s = 0.0;
  double length_m = 0.0;
};

struct Route {
  Path path;
  std::vector<GeoPoint> geometry;
  double duration_s = 0.0;
  double distance_m = 0.0;
  /// Travel-time weighted mean of e; absent when no layer is available or the route is empty.
  std::optional<double> mean_happiness;
  std::vector<RouteEdge> per_edge;

  bool empty() const noexcept { return path.empty(); }
};

/// layer may be null, in which case base times come from free-flow speeds.
Route assemble_route(const Path& path, const RoadGraph& graph, const EmotionLayer* layer);

enum class TurnKind : std::uint8_t { depart, continue_straight, turn_left, turn_right, sharp_left, sharp_right, u_turn, arrive };
std::string_view to_string(TurnKind kind) noexcept;

struct TurnInstruction {
  TurnKind kind = TurnKind::depart;
  OsmId node_id = 0;
  RoadType road_type = RoadType::unclassified;
  double bearing_change_deg = 0.0;
};

/// Classifies a signed bearing change (positive = clockwise = right).
TurnKind classify_turn(double delta_deg) noexcept;

/// depart, one entry per non-straight junction, arrive. Empty for an empty route.
std::vector<TurnInstruction> turn_instructions(const Route& route, const RoadGraph& graph);

}  // namespace affect_router
