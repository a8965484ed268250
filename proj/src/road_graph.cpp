#include "affect_router/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "affect_router/context.hpp"
#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

namespace {

constexpr std::array<std::string_view, kRoadTypeCount> kRoadTypeNames = {
    "residential", "living_street", "primary",      "secondary", "tertiary",
    "motorway",    "trunk",         "unclassified", "service"};

}  // namespace

std::string_view to_string(RoadType type) noexcept {
  return kRoadTypeNames[static_cast<std::size_t>(type)];
}

RoadType parse_road_type(std::string_view name) {
  for (std::size_t i = 0; i < kRoadTypeNames.size(); ++i) {
    if (kRoadTypeNames[i] == name) return static_cast<RoadType>(i);
  }
  throw ParseError("unknown road_type '" + std::string(name) + "'");
}

RoadType road_type_from_highway(std::string_view highway) noexcept {
  for (std::size_t i = 0; i < kRoadTypeNames.size(); ++i) {
    if (kRoadTypeNames[i] == highway) return static_cast<RoadType>(i);
  }
  // Ramps inherit the class of the road they connect.
  constexpr std::string_view kLink = "_link";
  if (highway.size() > kLink.size() && highway.ends_with(kLink)) {
    const auto base = highway.substr(0, highway.size() - kLink.size());
    for (auto type : {RoadType::motorway, RoadType::trunk, RoadType::primary, RoadType::secondary,
                      RoadType::tertiary}) {
      if (kRoadTypeNames[static_cast<std::size_t>(type)] == base) return type;
    }
  }
  return RoadType::unclassified;
}

RoadGraph::RoadGraph(std::vector<RoadNode> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  index_by_id_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_by_id_.emplace(nodes_[i].id, static_cast<NodeIndex>(i)).second) {
      throw ValidationError("duplicate node id " + std::to_string(nodes_[i].id));
    }
  }

  const std::size_t n = nodes_.size();
  std::vector<std::uint32_t> out_degree(n, 0);
  std::vector<std::uint32_t> in_degree(n, 0);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const RoadEdge& e = edges_[i];
    const std::string label = "edge " + std::to_string(i);
    if (e.id != i) throw ValidationError(label + ": id must equal its position");
    if (e.from >= n || e.to >= n) throw ValidationError(label + ": endpoint does not resolve");
    if (e.geometry.size() < 2) throw ValidationError(label + ": geometry needs at least 2 points");
    if (!(e.geometry.front() == nodes_[e.from].point) || !(e.geometry.back() == nodes_[e.to].point)) {
      throw ValidationError(label + ": geometry endpoints do not match nodes");
    }
    const double expected = polyline_length(e.geometry);
    if (!std::isfinite(e.length_m) || e.length_m < 0.0 ||
        std::abs(e.length_m - expected) > 1e-6 * std::max(expected, 1e-9)) {
      throw ValidationError(label + ": length_m disagrees with geometry");
    }
    if (e.max_speed_kmh && !(*e.max_speed_kmh > 0.0 && std::isfinite(*e.max_speed_kmh))) {
      throw ValidationError(label + ": max_speed_kmh must be positive");
    }
    if (e.n_lanes && *e.n_lanes <= 0) throw ValidationError(label + ": n_lanes must be positive");
    ++out_degree[e.from];
    ++in_degree[e.to];
  }

  out_offsets_.assign(n + 1, 0);
  in_offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    out_offsets_[v + 1] = out_offsets_[v] + out_degree[v];
    in_offsets_[v + 1] = in_offsets_[v] + in_degree[v];
  }
  out_edges_.resize(edges_.size());
  in_edges_.resize(edges_.size());
  std::vector<std::uint32_t> out_fill(out_offsets_.begin(), out_offsets_.end() - 1);
  std::vector<std::uint32_t> in_fill(in_offsets_.begin(), in_offsets_.end() - 1);
  for (const RoadEdge& e : edges_) {
    out_edges_[out_fill[e.from]++] = e.id;
    in_edges_[in_fill[e.to]++] = e.id;
  }

  std::vector<GeoPoint> points;
  points.reserve(nodes_.size());
  for (const auto& node : nodes_) points.push_back(node.point);
  for (const auto& e : edges_) points.insert(points.end(), e.geometry.begin(), e.geometry.end());
  bounds_ = bounding_box(points);

  fingerprint_ = fnv1a64(canonical_graph_json(*this));
}

std::optional<NodeIndex> RoadGraph::find_node(OsmId id) const noexcept {
  const auto it = index_by_id_.find(id);
  if (it == index_by_id_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadGraph::index_of(OsmId id) const {
  if (auto index = find_node(id)) return *index;
  throw ValidationError("unknown node id " + std::to_string(id));
}

NodeIndex nearest_node_index(const RoadGraph& graph, const GeoPoint& p) {
  if (graph.node_count() == 0) throw ValidationError("nearest_node on empty graph");
  NodeIndex best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (NodeIndex i = 0; i < graph.node_count(); ++i) {
    const RoadNode& node = graph.node(i);
    const double d = haversine(p, node.point);
    if (d < best_dist || (d == best_dist && node.id < graph.node(best).id)) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

const RoadNode& nearest_node(const RoadGraph& graph, const GeoPoint& p) {
  return graph.node(nearest_node_index(graph, p));
}

double edge_travel_time(const RoadEdge& edge, const TrafficInfo* traffic,
                        const SpeedDefaults& defaults) {
  const double max_speed = edge.max_speed_kmh.value_or(defaults[edge.road_type]);
  double speed = max_speed;
  if (traffic != nullptr) {
    speed = std::min(max_speed, std::max(kMinEffectiveSpeedKmh,
                                         traffic->freeflow_speed - traffic->reducedspeed));
  }
  if (edge.length_m == 0.0) return 0.0;
  return edge.length_m / (speed / 3.6);
}

double edge_travel_time(const RoadEdge& edge, const TrafficInfo* traffic) {
  return edge_travel_time(edge, traffic, SpeedDefaults{});
}

}  // namespace affect_router
