#include <algorithm>
#include <limits>
#include <queue>
#include <tuple>

#include "affect_router/error.hpp"
#include "affect_router/routing.hpp"

namespace affect_router {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_view(const RoadGraph& graph, const WeightedView& weights) {
  if (weights.size() != graph.edge_count() || weights.graph_fingerprint() != graph.fingerprint()) {
    throw ValidationError("weights do not match graph");
  }
}

std::vector<EdgeId> trace(const RoadGraph& graph, const std::vector<EdgeId>& pred, NodeIndex node) {
  std::vector<EdgeId> edges;
  while (pred[node] != kInvalidEdge) {
    edges.push_back(pred[node]);
    node = graph.edge(pred[node]).from;
  }
  std::reverse(edges.begin(), edges.end());
  return edges;
}

}  // namespace

double path_weight(std::span<const EdgeId> edges, const WeightedView& weights) noexcept {
  double total = 0.0;
  for (EdgeId e : edges) total += weights[e];
  return total;
}

Path dijkstra(const RoadGraph& graph, const WeightedView& weights, NodeIndex source, NodeIndex target) {
  check_view(graph, weights);
  if (source >= graph.node_count() || target >= graph.node_count()) throw ValidationError("node out of range");
  if (source == target) return Path{{}, 0.0, source, target};

  const std::size_t n = graph.node_count();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> hops(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<EdgeId> pred(n, kInvalidEdge);
  std::vector<bool> settled(n, false);

  using Entry = std::tuple<double, std::uint32_t, NodeIndex>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[source] = 0.0;
  hops[source] = 0;
  queue.emplace(0.0, 0, source);

  while (!queue.empty()) {
    const auto [d, h, v] = queue.top();
    queue.pop();
    if (settled[v] || d != dist[v] || h != hops[v]) continue;
    settled[v] = true;
    if (v == target) break;
    for (EdgeId e : graph.out_edges(v)) {
      const NodeIndex u = graph.edge(e).to;
      if (settled[u]) continue;
      const double nd = d + weights[e];
      const std::uint32_t nh = h + 1;
      if (nd < dist[u] || (nd == dist[u] && nh < hops[u])) {
        dist[u] = nd;
        hops[u] = nh;
        pred[u] = e;
        queue.emplace(nd, nh, u);
      } else if (nd == dist[u] && nh == hops[u] && pred[u] != e) {
        // Equal weight and length: keep the lexicographically smaller edge sequence.
        auto candidate = trace(graph, pred, v);
        candidate.push_back(e);
        if (candidate < trace(graph, pred, u)) pred[u] = e;
      }
    }
  }
  if (!settled[target]) throw NoRouteError();
  Path path{trace(graph, pred, target), 0.0, source, target};
  path.total_weight = path_weight(path.edges, weights);
  return path;
}

std::vector<bool> reachable_from(const RoadGraph& graph, NodeIndex source) {
  std::vector<bool> seen(graph.node_count(), false);
  if (source >= graph.node_count()) return seen;
  std::vector<NodeIndex> stack{source};
  seen[source] = true;
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    for (EdgeId e : graph.out_edges(v)) {
      const NodeIndex u = graph.edge(e).to;
      if (!seen[u]) {
        seen[u] = true;
        stack.push_back(u);
      }
    }
  }
  return seen;
}

}  // namespace affect_router
