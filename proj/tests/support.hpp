#pragma once

// Fixtures and reference implementations shared by the test binaries. The
// oracles here are written independently of the library: different formulas
// or brute force, so agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "affect_router/emotion_layer.hpp"
#include "affect_router/emotion_model.hpp"
#include "affect_router/road_graph.hpp"

namespace testing_support {

using namespace affect_router;

inline std::filesystem::path data_dir() { return std::filesystem::path(AFFECT_ROUTER_SOURCE_DIR) / "data"; }

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("affect-router-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Uniform [0,1) double from a 64-bit engine.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline RoadEdge straight_edge(const std::vector<RoadNode>& nodes, EdgeId id, NodeIndex from, NodeIndex to,
                              RoadType type = RoadType::residential) {
  RoadEdge e;
  e.id = id;
  e.from = from;
  e.to = to;
  e.geometry = {nodes[from].point, nodes[to].point};
  e.length_m = polyline_length(e.geometry);
  e.road_type = type;
  return e;
}

/// Random sparse directed graph: nodes scattered over a few kilometres, each
/// linked to nearby nodes, most links in both directions.
inline RoadGraph random_graph(std::size_t n, std::uint64_t seed, double two_way_fraction = 0.8) {
  std::mt19937_64 rng(seed);
  std::vector<RoadNode> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back({static_cast<OsmId>(i + 1), GeoPoint(48.0 + 0.05 * unit(rng), 11.0 + 0.05 * unit(rng))});
  }
  std::vector<RoadEdge> edges;
  auto add = [&](NodeIndex a, NodeIndex b) {
    const auto type = kAllRoadTypes[rng() % kAllRoadTypes.size()];
    edges.push_back(straight_edge(nodes, static_cast<EdgeId>(edges.size()), a, b, type));
  };
  std::vector<NodeIndex> order(n);
  for (NodeIndex a = 0; a < n; ++a) {
    // Candidates are the six nearest other nodes in degree space.
    std::iota(order.begin(), order.end(), NodeIndex{0});
    auto d2 = [&](NodeIndex b) {
      const double dlat = nodes[a].point.lat() - nodes[b].point.lat();
      const double dlon = nodes[a].point.lon() - nodes[b].point.lon();
      return dlat * dlat + dlon * dlon;
    };
    const std::size_t k = std::min<std::size_t>(7, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](NodeIndex x, NodeIndex y) { return d2(x) < d2(y) || (d2(x) == d2(y) && x < y); });
    const std::size_t links = 1 + rng() % 3;
    for (std::size_t j = 0; j < links; ++j) {
      const auto b = order[rng() % k];
      if (b == a) continue;
      add(a, b);
      if (unit(rng) < two_way_fraction) add(b, a);
    }
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

/// Per-edge weights in [1, 1000), or small integers when ties are wanted.
inline WeightedView random_weights(const RoadGraph& g, std::uint64_t seed, bool integer = false) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(g.edge_count());
  for (auto& x : w) x = integer ? static_cast<double>(1 + rng() % 5) : 1.0 + 999.0 * unit(rng);
  return WeightedView(g.fingerprint(), WeightParams{WeightMode::fastest, 0.0}, std::move(w));
}

inline EmotionLayer constant_layer(const RoadGraph& g, double e, double c) {
  std::vector<EdgeEmotion> rows;
  for (const auto& edge : g.edges()) {
    rows.push_back({edge.id, e, c, std::max(kMinBaseTimeS, quantize9(edge_travel_time(edge, nullptr)))});
  }
  return EmotionLayer(g.fingerprint(), std::move(rows), LayerMetadata{"2023-01-01T12:00:00", "constant", 0});
}

/// Layer with e and c drawn uniformly from [lo, 1].
inline EmotionLayer random_layer(const RoadGraph& g, std::uint64_t seed, double lo = 0.05) {
  std::mt19937_64 rng(seed);
  std::vector<EdgeEmotion> rows;
  for (const auto& edge : g.edges()) {
    const double e = quantize9(lo + (1.0 - lo) * unit(rng));
    const double c = quantize9(lo + (1.0 - lo) * unit(rng));
    rows.push_back({edge.id, e, c, std::max(kMinBaseTimeS, quantize9(edge_travel_time(edge, nullptr)))});
  }
  return EmotionLayer(g.fingerprint(), std::move(rows), LayerMetadata{"2023-01-01T12:00:00", "random", 0});
}

/// Random forest of 1 to 8 trees, each at most 6 levels deep.
inline DecisionForest random_forest(std::mt19937_64& rng) {
  DecisionForest forest;
  const std::size_t trees = 1 + rng() % 8;
  for (std::size_t k = 0; k < trees; ++k) {
    DecisionTree tree;
    auto grow = [&](auto&& self, int depth) -> std::uint32_t {
      const auto index = static_cast<std::uint32_t>(tree.nodes.size());
      if (depth == 6 || unit(rng) < 0.3) {
        LeafNode leaf;
        double sum = 0.0;
        for (double& p : leaf.p) sum += (p = unit(rng) < 0.3 ? 0.0 : unit(rng));
        if (sum == 0.0) {
          leaf.p[rng() % leaf.p.size()] = 1.0;
        } else {
          for (double& p : leaf.p) p /= sum;
        }
        tree.nodes.emplace_back(leaf);
        return index;
      }
      tree.nodes.emplace_back(SplitNode{static_cast<std::uint32_t>(rng() % kFeatureCount), 100.0 * unit(rng) - 10.0, 0, 0});
      const std::uint32_t left = self(self, depth + 1);
      const std::uint32_t right = self(self, depth + 1);
      std::get<SplitNode>(tree.nodes[index]).left = left;
      std::get<SplitNode>(tree.nodes[index]).right = right;
      return index;
    };
    grow(grow, 0);
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

inline FeatureVector random_features(std::mt19937_64& rng) {
  FeatureVector v;
  for (double& x : v.values) x = unit(rng) < 0.2 ? std::floor(4 * unit(rng)) : 100.0 * unit(rng) - 10.0;
  return v;
}

namespace oracle {

/// Great-circle distance through the chord of unit vectors.
inline double chord_distance(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kR = 6371000.0;
  auto vec = [](const GeoPoint& p) {
    const double la = p.lat() * std::numbers::pi / 180.0;
    const double lo = p.lon() * std::numbers::pi / 180.0;
    return std::array<double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
  };
  const auto u = vec(a);
  const auto v = vec(b);
  const double chord = std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                                 (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * kR * std::asin(std::min(1.0, chord / 2.0));
}

/// Minimum path weight by exhaustive depth-first enumeration of simple paths.
/// Infinity when unreachable.
inline double enumerate_shortest(const RoadGraph& g, const std::vector<double>& w, NodeIndex s, NodeIndex t) {
  if (s == t) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> on_path(g.node_count(), false);
  std::function<void(NodeIndex, double)> dfs = [&](NodeIndex v, double acc) {
    if (v == t) {
      best = std::min(best, acc);
      return;
    }
    on_path[v] = true;
    for (const auto& e : g.edges()) {
      if (e.from == v && !on_path[e.to]) dfs(e.to, acc + w[e.id]);
    }
    on_path[v] = false;
  };
  dfs(s, 0.0);
  return best;
}

/// Bellman-Ford distances from s.
inline std::vector<double> bellman_ford(const RoadGraph& g, const std::vector<double>& w, NodeIndex s) {
  std::vector<double> d(g.node_count(), std::numeric_limits<double>::infinity());
  d[s] = 0.0;
  for (std::size_t round = 0; round + 1 < g.node_count(); ++round) {
    bool changed = false;
    for (const auto& e : g.edges()) {
      if (d[e.from] + w[e.id] < d[e.to]) {
        d[e.to] = d[e.from] + w[e.id];
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

/// Two-sided exact Mann-Whitney p-value by enumerating every split of the
/// pooled sample into groups of the original sizes.
inline double mwu_enumerated_p(const std::vector<double>& x, const std::vector<double>& y, double* u_out = nullptr) {
  std::vector<double> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  const std::size_t n = pooled.size();
  const std::size_t n1 = x.size();
  auto u_of = [&](const std::vector<bool>& in_x) {
    double u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_x[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_x[j]) continue;
        if (pooled[i] > pooled[j]) u += 1.0;
        if (pooled[i] == pooled[j]) u += 0.5;
      }
    }
    return u;
  };
  std::vector<bool> observed(n, false);
  std::fill(observed.begin(), observed.begin() + static_cast<long>(n1), true);
  const double u_obs = u_of(observed);
  if (u_out != nullptr) *u_out = u_obs;
  double le = 0.0;
  double ge = 0.0;
  double total = 0.0;
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(n1), true);
  std::sort(mask.begin(), mask.end());
  do {
    const double u = u_of(mask);
    total += 1.0;
    if (u <= u_obs) le += 1.0;
    if (u >= u_obs) ge += 1.0;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

struct Line {
  double slope;
  double intercept;
  double r_squared;
};

/// Least squares via the raw-sum normal equations and Cramer's rule;
/// R^2 as the squared Pearson correlation.
inline Line ols_normal_equations(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    sxy += static_cast<long double>(x[i]) * y[i];
    syy += static_cast<long double>(y[i]) * y[i];
  }
  const long double det = n * sxx - sx * sx;
  const long double slope = (n * sxy - sx * sy) / det;
  const long double intercept = (sxx * sy - sx * sxy) / det;
  const long double r = (n * sxy - sx * sy) / std::sqrt(det * (n * syy - sy * sy));
  return {static_cast<double>(slope), static_cast<double>(intercept), static_cast<double>(r * r)};
}

/// Walks a serialized tree (the JSON model format) from its root for one feature vector.
inline std::vector<double> trace_tree_json(const nlohmann::json& tree, const std::vector<double>& features) {
  std::size_t i = 0;
  while (true) {
    const auto& node = tree.at(i);
    if (node.contains("leaf")) return node["leaf"]["p"].get<std::vector<double>>();
    const auto& s = node["split"];
    const double v = features.at(s["f"].get<std::size_t>());
    i = v <= s["t"].get<double>() ? s["l"].get<std::size_t>() : s["r"].get<std::size_t>();
  }
}

/// Points on a circle of the given radius (metres) around (lat0, lon0),
/// using a local flat projection.
inline std::vector<GeoPoint> circle_arc(double lat0, double lon0, double radius_m, int points, double sweep_rad) {
  constexpr double kR = 6371000.0;
  std::vector<GeoPoint> out;
  for (int k = 0; k < points; ++k) {
    const double a = sweep_rad * k / (points - 1);
    const double north = radius_m * std::sin(a);
    const double east = radius_m * std::cos(a);
    const double lat = lat0 + north / kR * 180.0 / std::numbers::pi;
    const double lon = lon0 + east / (kR * std::cos(lat0 * std::numbers::pi / 180.0)) * 180.0 / std::numbers::pi;
    out.emplace_back(lat, lon);
  }
  return out;
}

}  // namespace oracle
}  // namespace testing_support
