#include <cmath>

#include "affect_router/error.hpp"
#include "affect_router/routing.hpp"

namespace affect_router {

Route assemble_route(const Path& path, const RoadGraph& graph, const EmotionLayer* layer) {
  if (layer != nullptr) layer->check_matches(graph);
  Route route;
  route.path = path;
  double weighted_e = 0.0;
  double sum_e = 0.0;
  NodeIndex at = path.source;
  for (EdgeId id : path.edges) {
    const RoadEdge& edge = graph.edge(id);
    if (edge.from != at) throw ValidationError("path is not continuous at edge " + std::to_string(id));
    at = edge.to;
    RouteEdge re;
    re.edge_id = id;
    re.road_type = edge.road_type;
    re.length_m = edge.length_m;
    if (layer != nullptr) {
      const EdgeEmotion& emotion = (*layer)[id];
      re.e = emotion.e;
      re.c = emotion.c;
      re.base_time_s = emotion.base_time_s;
    } else {
      re.base_time_s = std::max(kMinBaseTimeS, edge_travel_time(edge, nullptr));
    }
    route.duration_s += re.base_time_s;
    route.distance_m += re.length_m;
    weighted_e += re.e * re.base_time_s;
    sum_e += re.e;
    const auto begin = route.geometry.empty() ? edge.geometry.begin() : edge.geometry.begin() + 1;
    route.geometry.insert(route.geometry.end(), begin, edge.geometry.end());
    route.per_edge.push_back(re);
  }
  if (!path.edges.empty() && at != path.target) throw ValidationError("path does not end at its target");
  if (layer != nullptr && !route.per_edge.empty()) {
    route.mean_happiness = route.duration_s > 0.0 ? weighted_e / route.duration_s
                                                  : sum_e / static_cast<double>(route.per_edge.size());
  }
  return route;
}

std::string_view to_string(TurnKind kind) noexcept {
  switch (kind) {
    case TurnKind::depart: return "depart";
    case TurnKind::continue_straight: return "continue";
    case TurnKind::turn_left: return "turn_left";
    case TurnKind::turn_right: return "turn_right";
    case TurnKind::sharp_left: return "sharp_left";
    case TurnKind::sharp_right: return "sharp_right";
    case TurnKind::u_turn: return "u_turn";
    case TurnKind::arrive: return "arrive";
  }
  return "continue";
}

TurnKind classify_turn(double delta_deg) noexcept {
  const double magnitude = std::abs(delta_deg);
  if (magnitude < 30.0) return TurnKind::continue_straight;
  if (magnitude > 160.0) return TurnKind::u_turn;
  const bool right = delta_deg > 0.0;
  if (magnitude <= 120.0) return right ? TurnKind::turn_right : TurnKind::turn_left;
  return right ? TurnKind::sharp_right : TurnKind::sharp_left;
}

namespace {

// Bearing of the last non-degenerate segment arriving at the end of the geometry.
double arrival_bearing(const std::vector<GeoPoint>& g) {
  for (std::size_t i = g.size() - 1; i > 0; --i) {
    if (!(g[i - 1] == g[i])) return bearing_deg(g[i - 1], g[i]);
  }
  return 0.0;
}

double departure_bearing(const std::vector<GeoPoint>& g) {
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i - 1] == g[i])) return bearing_deg(g[i - 1], g[i]);
  }
  return 0.0;
}

}  // namespace

std::vector<TurnInstruction> turn_instructions(const Route& route, const RoadGraph& graph) {
  std::vector<TurnInstruction> out;
  if (route.path.edges.empty()) return out;
  const auto& edges = route.path.edges;
  const RoadEdge& first = graph.edge(edges.front());
  out.push_back({TurnKind::depart, graph.node(first.from).id, first.road_type, 0.0});
  for (std::size_t i = 1; i < edges.size(); ++i) {
    const RoadEdge& in = graph.edge(edges[i - 1]);
    const RoadEdge& next = graph.edge(edges[i]);
    double delta = departure_bearing(next.geometry) - arrival_bearing(in.geometry);
    while (delta > 180.0) delta -= 360.0;
    while (delta <= -180.0) delta += 360.0;
    const TurnKind kind = classify_turn(delta);
    if (kind == TurnKind::continue_straight) continue;
    out.push_back({kind, graph.node(in.to).id, next.road_type, delta});
  }
  const RoadEdge& last = graph.edge(edges.back());
  out.push_back({TurnKind::arrive, graph.node(last.to).id, last.road_type, 0.0});
  return out;
}

}  // namespace affect_router
