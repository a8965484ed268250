#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "affect_router/geo.hpp"

namespace affect_router {

using NodeIndex = std::uint32_t;
using EdgeId = std::uint32_t;
using OsmId = std::int64_t;

inline constexpr NodeIndex kInvalidNode = static_cast<NodeIndex>(-1);
inline constexpr EdgeId kInvalidEdge = static_cast<EdgeId>(-1);

// Order is the one-hot order used by the feature encoder.
enum class RoadType : std::uint8_t {
  residential,
  living_street,
  primary,
  secondary,
  tertiary,
  motorway,
  trunk,
  unclassified,
  service,
};
inline constexpr std::size_t kRoadTypeCount = 9;
inline constexpr std::array<RoadType, kRoadTypeCount> kAllRoadTypes = {
    RoadType::residential, RoadType::living_street, RoadType::primary,
    RoadType::secondary,   RoadType::tertiary,      RoadType::motorway,
    RoadType::trunk,       RoadType::unclassified,  RoadType::service};

std::string_view to_string(RoadType type) noexcept;
/// Exact name match; throws ParseError on unknown names.
RoadType parse_road_type(std::string_view name);
/// Maps an OSM highway=* value onto a category. Unknown values become unclassified.
RoadType road_type_from_highway(std::string_view highway) noexcept;

/// Fallback max speed per road type (km/h), used when a way carries no maxspeed.
struct SpeedDefaults {
  std::array<double, kRoadTypeCount> kmh = {30, 10, 80, 70, 60, 120, 100, 50, 15};

  double operator[](RoadType type) const noexcept { return kmh[static_cast<std::size_t>(type)]; }
  double& operator[](RoadType type) noexcept { return kmh[static_cast<std::size_t>(type)]; }
};

struct RoadNode {
  OsmId id = 0;
  GeoPoint point;

  friend bool operator==(const RoadNode&, const RoadNode&) = default;
};

struct RoadEdge {
  EdgeId id = 0;
  NodeIndex from = 0;
  NodeIndex to = 0;
  std::vector<GeoPoint> geometry;
  double length_m = 0.0;
  RoadType road_type = RoadType::unclassified;
  std::optional<double> max_speed_kmh;
  std::optional<int> n_lanes;

  friend bool operator==(const RoadEdge&, const RoadEdge&) = default;
};

struct TrafficInfo;

/// Immutable directed road graph with CSR adjacency.
///
/// Nodes are addressed by dense NodeIndex; the stable OSM id is kept on each
/// RoadNode. Edge ids are dense and equal to their position in edges().
class RoadGraph {
 public:
  RoadGraph() = default;
  /// Validates endpoints, geometry, and lengths, then builds adjacency.
  RoadGraph(std::vector<RoadNode> nodes, std::vector<RoadEdge> edges);

  std::span<const RoadNode> nodes() const noexcept { return nodes_; }
  std::span<const RoadEdge> edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  const RoadNode& node(NodeIndex index) const { return nodes_.at(index); }
  const RoadEdge& edge(EdgeId id) const { return edges_.at(id); }

  std::span<const EdgeId> out_edges(NodeIndex node) const noexcept {
    return {out_edges_.data() + out_offsets_[node], out_edges_.data() + out_offsets_[node + 1]};
  }
  std::span<const EdgeId> in_edges(NodeIndex node) const noexcept {
    return {in_edges_.data() + in_offsets_[node], in_edges_.data() + in_offsets_[node + 1]};
  }

  std::optional<NodeIndex> find_node(OsmId id) const noexcept;
  NodeIndex index_of(OsmId id) const;

  /// 64-bit hash of the canonical native graph serialization.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  BoundingBox bounds() const noexcept { return bounds_; }

 private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::uint32_t> out_offsets_{0};
  std::vector<EdgeId> out_edges_;
  std::vector<std::uint32_t> in_offsets_{0};
  std::vector<EdgeId> in_edges_;
  std::unordered_map<OsmId, NodeIndex> index_by_id_;
  std::uint64_t fingerprint_ = 0;
  BoundingBox bounds_;
};

/// Node minimizing haversine distance to p; ties go to the smallest node id.
const RoadNode& nearest_node(const RoadGraph& graph, const GeoPoint& p);
NodeIndex nearest_node_index(const RoadGraph& graph, const GeoPoint& p);

/// Travel time in seconds. With traffic, the effective speed is
/// min(max_speed, max(5, freeflow - reduced)).
double edge_travel_time(const RoadEdge& edge, const TrafficInfo* traffic);
double edge_travel_time(const RoadEdge& edge, const TrafficInfo* traffic,
                        const SpeedDefaults& defaults);

inline constexpr double kMinEffectiveSpeedKmh = 5.0;

}  // namespace affect_router
