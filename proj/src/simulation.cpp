#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <unordered_map>

#include "affect_router/analysis.hpp"
#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

using nlohmann::json;

namespace {

// Unbiased draw in [0, bound) that does not depend on the standard library's
// distribution implementation, so sequences match across toolchains.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r = 0;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

}  // namespace

std::vector<OdPair> sample_od_pairs(const RoadGraph& graph, std::size_t n, std::uint64_t seed,
                                    double min_separation_m) {
  std::vector<OdPair> pairs;
  if (n == 0) return pairs;
  if (graph.node_count() < 2) throw SimulationError("graph has fewer than 2 nodes");
  std::mt19937_64 rng(seed);
  std::unordered_map<NodeIndex, std::vector<bool>> reach;
  const std::size_t budget = 50 * n;
  std::size_t attempts = 0;
  std::size_t too_close = 0;
  std::size_t unreachable = 0;
  std::size_t same = 0;
  while (pairs.size() < n) {
    if (attempts == budget) {
      throw SimulationError("OD sampling exhausted " + std::to_string(budget) + " attempts: accepted " +
                            std::to_string(pairs.size()) + ", same-node " + std::to_string(same) + ", too close " +
                            std::to_string(too_close) + ", unreachable " + std::to_string(unreachable));
    }
    ++attempts;
    const auto origin = static_cast<NodeIndex>(uniform_index(rng, graph.node_count()));
    const auto destination = static_cast<NodeIndex>(uniform_index(rng, graph.node_count()));
    if (origin == destination) {
      ++same;
      continue;
    }
    if (haversine(graph.node(origin).point, graph.node(destination).point) < min_separation_m) {
      ++too_close;
      continue;
    }
    auto it = reach.find(origin);
    if (it == reach.end()) it = reach.emplace(origin, reachable_from(graph, origin)).first;
    if (!it->second[destination]) {
      ++unreachable;
      continue;
    }
    pairs.push_back({origin, destination});
  }
  return pairs;
}

std::vector<EdgeCharacteristics> edge_characteristics(const RoadGraph& graph, const ProviderSet& providers,
                                                      ContextCache* cache) {
  std::vector<EdgeCharacteristics> out;
  out.reserve(graph.edge_count());
  const SpeedDefaults defaults;
  for (const RoadEdge& edge : graph.edges()) {
    std::optional<ProviderSample> sample;
    if (cache != nullptr) sample = cache->find(edge.id, providers.epoch);
    if (!sample) {
      sample = sample_providers(edge, providers);
      if (cache != nullptr) cache->insert(edge.id, providers.epoch, *sample);
    }
    out.push_back({sample->satellite_greeness, sample->traffic.freeflow_speed,
                   edge.max_speed_kmh.value_or(defaults[edge.road_type])});
  }
  return out;
}

RouteMetrics route_metrics(const Route& route, std::span<const EdgeCharacteristics> characteristics) {
  RouteMetrics m;
  m.duration_s = route.duration_s;
  m.distance_m = route.distance_m;
  m.mean_e = route.mean_happiness.value_or(0.0);
  m.curviness = route_curviness(route.geometry);
  if (!route.per_edge.empty() && route.duration_s > 0.0) {
    m.shares = roadtype_shares(route);
    if (!characteristics.empty()) {
      for (const auto& e : route.per_edge) {
        const auto& ch = characteristics[e.edge_id];
        m.greeness += ch.satellite_greeness * e.base_time_s;
        m.max_speed += ch.max_speed * e.base_time_s;
        m.freeflow_speed += ch.freeflow_speed * e.base_time_s;
      }
      m.greeness /= route.duration_s;
      m.max_speed /= route.duration_s;
      m.freeflow_speed /= route.duration_s;
    }
  }
  return m;
}

DistributionSummary summarize(std::span<const double> values) {
  DistributionSummary s;
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.sd = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

namespace {

struct RoutingPair {
  const RoadGraph& graph;
  const EmotionLayer& layer;
  WeightedView fastest_view;
  CHIndex fastest_index;

  RoutingPair(const RoadGraph& g, const EmotionLayer& l)
      : graph(g), layer(l), fastest_view(apply_weights(g, l, WeightParams{WeightMode::fastest, 0.0})),
        fastest_index(ch_preprocess(g, fastest_view)) {}
};

SimulationReport simulate_with(const RoutingPair& routing, const WeightParams& params, std::span<const OdPair> pairs,
                               const SimulationOptions& options) {
  const RoadGraph& graph = routing.graph;
  const EmotionLayer& layer = routing.layer;
  const WeightedView happy_view = apply_weights(graph, layer, params);
  const CHIndex happy_index = ch_preprocess(graph, happy_view);

  SimulationReport report;
  report.params = params;
  report.requested = pairs.size();
  report.min_separation_m = options.min_separation_m;
  report.graph_fingerprint = to_hex(graph.fingerprint());
  report.model_id = layer.metadata().model_id;

  for (const OdPair& pair : pairs) {
    Route fastest;
    Route happy;
    try {
      fastest = assemble_route(ch_query(routing.fastest_index, routing.fastest_view, pair.origin, pair.destination),
                               graph, &layer);
      happy = assemble_route(ch_query(happy_index, happy_view, pair.origin, pair.destination), graph, &layer);
    } catch (const NoRouteError&) {
      ++report.skipped;
      continue;
    }
    PairRow row;
    row.origin = graph.node(pair.origin).id;
    row.destination = graph.node(pair.destination).id;
    row.fastest = route_metrics(fastest, options.characteristics);
    row.happy = route_metrics(happy, options.characteristics);
    row.overlap_pct = route_overlap(fastest, happy);
    row.identical = fastest.path.edges == happy.path.edges;
    report.rows.push_back(std::move(row));
  }

  const auto& rows = report.rows;
  if (rows.empty()) return report;
  std::vector<double> fastest_min;
  std::vector<double> happy_min;
  double overlap_sum = 0.0;
  std::size_t identical = 0;
  for (const auto& row : rows) {
    fastest_min.push_back(row.fastest.duration_s / 60.0);
    happy_min.push_back(row.happy.duration_s / 60.0);
    overlap_sum += row.overlap_pct;
    identical += row.identical ? 1 : 0;
  }
  report.mean_overlap_pct = overlap_sum / static_cast<double>(rows.size());
  report.identical_fraction = static_cast<double>(identical) / static_cast<double>(rows.size());
  try {
    report.regression = ols_fit(fastest_min, happy_min);
  } catch (const ValidationError&) {
    report.regression.reset();
  }

  auto compare = [&](const std::string& name, auto&& get) {
    std::vector<double> f;
    std::vector<double> h;
    for (const auto& row : rows) {
      f.push_back(get(row.fastest));
      h.push_back(get(row.happy));
    }
    report.characteristics.push_back({name, summarize(f), summarize(h), mann_whitney_u(h, f)});
  };
  compare("happiness", [](const RouteMetrics& m) { return m.mean_e; });
  compare("curviness", [](const RouteMetrics& m) { return m.curviness; });
  compare("greeness", [](const RouteMetrics& m) { return m.greeness; });
  compare("max_speed", [](const RouteMetrics& m) { return m.max_speed; });
  compare("freeflow_speed", [](const RouteMetrics& m) { return m.freeflow_speed; });
  compare("duration_s", [](const RouteMetrics& m) { return m.duration_s; });
  compare("distance_m", [](const RouteMetrics& m) { return m.distance_m; });

  for (RoadType type : kAllRoadTypes) {
    std::vector<double> f;
    std::vector<double> h;
    for (const auto& row : rows) {
      const auto fi = row.fastest.shares.find(type);
      const auto hi = row.happy.shares.find(type);
      f.push_back(fi == row.fastest.shares.end() ? 0.0 : fi->second);
      h.push_back(hi == row.happy.shares.end() ? 0.0 : hi->second);
    }
    RoadTypeShareRow share;
    share.road_type = type;
    share.fastest_mean_share = summarize(f).mean;
    share.happy_mean_share = summarize(h).mean;
    share.test = mann_whitney_u(h, f);
    report.roadtype_shares.push_back(share);
  }
  return report;
}

}  // namespace

SimulationReport simulate_pairs(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params,
                                std::span<const OdPair> pairs, const SimulationOptions& options) {
  layer.check_matches(graph);
  params.validate();
  const RoutingPair routing(graph, layer);
  return simulate_with(routing, params, pairs, options);
}

SimulationReport run_simulation(const RoadGraph& graph, const EmotionLayer& layer, const WeightParams& params,
                                std::size_t n, std::uint64_t seed, const SimulationOptions& options) {
  layer.check_matches(graph);
  const auto pairs = sample_od_pairs(graph, n, seed, options.min_separation_m);
  auto report = simulate_pairs(graph, layer, params, pairs, options);
  report.seed = seed;
  return report;
}

std::vector<SweepRow> lambda_sweep(const RoadGraph& graph, const EmotionLayer& layer, std::span<const double> lambdas,
                                   std::span<const OdPair> pairs, const SimulationOptions& options) {
  layer.check_matches(graph);
  std::vector<SweepRow> table;
  if (lambdas.empty()) return table;
  if (pairs.empty()) throw ValidationError("lambda_sweep: no OD pairs");
  const RoutingPair routing(graph, layer);
  for (double lambda : lambdas) {
    const WeightParams params{WeightMode::happy_linear, lambda};
    params.validate();
    const auto report = simulate_with(routing, params, pairs, options);
    SweepRow row;
    row.lambda = lambda;
    row.routes = report.rows.size();
    for (const auto& r : report.rows) {
      row.mean_happy_s += r.happy.duration_s;
      row.mean_fastest_s += r.fastest.duration_s;
      row.mean_overlap_pct += r.overlap_pct;
    }
    if (row.routes > 0) {
      const double k = static_cast<double>(row.routes);
      row.mean_happy_s /= k;
      row.mean_fastest_s /= k;
      row.mean_overlap_pct /= k;
    }
    table.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

json summary_json(const DistributionSummary& s) {
  return json{{"mean", number(s.mean)}, {"median", number(s.median)}, {"sd", number(s.sd)},
              {"min", number(s.min)},   {"max", number(s.max)}};
}

json mwu_json(const MwuResult& r) {
  return json{{"u_statistic", number(r.u_statistic)},
              {"p_value", number(r.p_value)},
              {"method", std::string(to_string(r.method))},
              {"n1", r.n1},
              {"n2", r.n2}};
}

}  // namespace

std::string report_json(const SimulationReport& report) {
  json doc;
  doc["config"] = json{{"mode", std::string(to_string(report.params.mode))},
                       {"lambda", number(report.params.lambda)},
                       {"seed", report.seed},
                       {"requested_pairs", report.requested},
                       {"min_separation_m", number(report.min_separation_m)},
                       {"graph_fingerprint", report.graph_fingerprint},
                       {"model", report.model_id}};
  doc["n"] = report.rows.size();
  doc["skipped"] = report.skipped;
  doc["mean_overlap_pct"] = number(report.mean_overlap_pct);
  doc["identical_fraction"] = number(report.identical_fraction);
  if (report.regression) {
    const auto& r = *report.regression;
    doc["regression"] = json{{"x", "fastest_minutes"},
                             {"y", "happy_minutes"},
                             {"slope", number(r.slope)},
                             {"intercept", number(r.intercept)},
                             {"r_squared", number(r.r_squared)},
                             {"bic", number(r.bic)},
                             {"bic_convention", "n*ln(RSS/n) + k*ln(n), k=2"},
                             {"slope_p_value", r.slope_p_value ? number(*r.slope_p_value) : json(nullptr)},
                             {"n", r.n}};
  } else {
    doc["regression"] = nullptr;
  }
  json characteristics = json::array();
  for (const auto& c : report.characteristics) {
    characteristics.push_back(json{{"name", c.name},
                                   {"fastest", summary_json(c.fastest)},
                                   {"happy", summary_json(c.happy)},
                                   {"mann_whitney_u", mwu_json(c.test)}});
  }
  doc["characteristics"] = std::move(characteristics);
  json shares = json::array();
  for (const auto& s : report.roadtype_shares) {
    shares.push_back(json{{"road_type", std::string(to_string(s.road_type))},
                          {"fastest_mean_share", number(s.fastest_mean_share)},
                          {"happy_mean_share", number(s.happy_mean_share)},
                          {"mann_whitney_u", mwu_json(s.test)}});
  }
  doc["roadtype_shares"] = std::move(shares);
  return doc.dump(2) + "\n";
}

std::string pairs_csv(const SimulationReport& report) {
  std::string out(kPairsCsvHeader);
  out += "\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.origin) + "," + std::to_string(row.destination) + "," + fmt(row.fastest.duration_s) +
           "," + fmt(row.happy.duration_s) + "," + fmt(row.overlap_pct) + "," + fmt(row.happy.mean_e) + "," +
           fmt(row.fastest.mean_e) + "," + fmt(row.happy.curviness) + "," + fmt(row.fastest.curviness) + "," +
           fmt(row.happy.greeness) + "," + fmt(row.fastest.greeness) + "\n";
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "lambda,mean_happy_s,mean_fastest_s,mean_overlap_pct,routes\n";
  for (const auto& r : rows) {
    out += fmt(r.lambda) + "," + fmt(r.mean_happy_s) + "," + fmt(r.mean_fastest_s) + "," + fmt(r.mean_overlap_pct) +
           "," + std::to_string(r.routes) + "\n";
  }
  return out;
}

void write_report(const SimulationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report_json(report));
  write_file(dir / "pairs.csv", pairs_csv(report));
}

}  // namespace affect_router
