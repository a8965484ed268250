#include "affect_router/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "affect_router/analysis.hpp"
#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

using nlohmann::json;

std::string_view to_string(RouteMode mode) noexcept { return mode == RouteMode::fastest ? "fastest" : "happy"; }

RouteMode parse_route_mode(std::string_view name) {
  if (name == "fastest") return RouteMode::fastest;
  if (name == "happy") return RouteMode::happy;
  throw ValidationError("unknown route mode: " + std::string(name));
}

RoutePlanner::RoutePlanner(std::shared_ptr<const RoadGraph> graph, std::shared_ptr<const EmotionLayer> layer,
                           std::vector<double> lambda_grid)
    : graph_(std::move(graph)), layer_(std::move(layer)), grid_(std::move(lambda_grid)) {
  if (!graph_) throw ValidationError("planner needs a graph");
  std::sort(grid_.begin(), grid_.end());
  grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
  WeightedView fastest_view;
  if (layer_) {
    layer_->check_matches(*graph_);
    fastest_view = apply_weights(*graph_, *layer_, WeightParams{WeightMode::fastest, 0.0});
  } else {
    fastest_view = travel_time_view(*graph_);
  }
  CHIndex ch = ch_preprocess(*graph_, fastest_view);
  fastest_.emplace(Indexed{std::move(fastest_view), std::move(ch)});
  if (!layer_) return;
  for (double lambda : grid_) {
    const WeightParams params{WeightMode::happy_linear, lambda};
    params.validate();
    WeightedView view = apply_weights(*graph_, *layer_, params);
    CHIndex index = ch_preprocess(*graph_, view);
    happy_.emplace(lambda, Indexed{std::move(view), std::move(index)});
  }
}

bool RoutePlanner::on_grid(double lambda) const noexcept { return happy_.contains(lambda); }

Route RoutePlanner::route(NodeIndex source, NodeIndex target, RouteMode mode, double lambda) const {
  if (mode == RouteMode::fastest) {
    return assemble_route(ch_query(fastest_->ch, fastest_->view, source, target), *graph_, layer_.get());
  }
  if (!layer_) throw ValidationError("happy routing requires an emotion layer");
  if (const auto it = happy_.find(lambda); it != happy_.end()) {
    return assemble_route(ch_query(it->second.ch, it->second.view, source, target), *graph_, layer_.get());
  }
  const WeightParams params{WeightMode::happy_linear, lambda};
  params.validate();
  const WeightedView view = apply_weights(*graph_, *layer_, params);
  return assemble_route(dijkstra(*graph_, view, source, target), *graph_, layer_.get());
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ValidationError("malformed " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<double> parse_list(std::string_view text, std::size_t count, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_double(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start), what));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() != count) throw ValidationError("malformed " + std::string(what) + ": '" + std::string(text) + "'");
  return out;
}

GeoPoint parse_point(const QueryParams& q, const char* key) {
  const auto it = q.find(key);
  if (it == q.end()) throw ValidationError(std::string("missing parameter '") + key + "'");
  const auto v = parse_list(it->second, 2, key);
  return GeoPoint(v[0], v[1]);
}

double parse_lambda(const QueryParams& q) {
  const auto it = q.find("lambda");
  if (it == q.end()) return kDefaultLambda;
  const double lambda = parse_double(it->second, "lambda");
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  return lambda;
}

json line_string(std::span<const GeoPoint> points) {
  json coords = json::array();
  for (const GeoPoint& p : points) coords.push_back(json::array({p.lon(), p.lat()}));
  return json{{"type", "LineString"}, {"coordinates", std::move(coords)}};
}

// Liang-Barsky clip of a segment against the box, in degrees.
bool segment_hits_box(const GeoPoint& a, const GeoPoint& b, const BoundingBox& box) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = b.lon() - a.lon();
  const double dy = b.lat() - a.lat();
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.lon() - box.min_lon, box.max_lon - a.lon(), a.lat() - box.min_lat, box.max_lat - a.lat()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return false;
  }
  return true;
}

bool edge_hits_box(const RoadEdge& edge, const BoundingBox& box) {
  const auto& g = edge.geometry;
  if (g.size() == 1) return segment_hits_box(g[0], g[0], box);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    if (segment_hits_box(g[i], g[i + 1], box)) return true;
  }
  return false;
}

ApiResponse ok(const json& body) { return {200, body.dump()}; }

}  // namespace

json route_json(const Route& route, const RoadGraph& graph, RouteMode mode, double lambda, double compute_ms) {
  json instructions = json::array();
  for (const auto& t : turn_instructions(route, graph)) {
    instructions.push_back(json{{"kind", std::string(to_string(t.kind))},
                                {"node_id", t.node_id},
                                {"road_type", std::string(to_string(t.road_type))},
                                {"bearing_change_deg", t.bearing_change_deg}});
  }
  json edges = json::array();
  for (EdgeId id : route.path.edges) edges.push_back(id);
  return json{{"mode", std::string(to_string(mode))},
              {"lambda", mode == RouteMode::happy ? json(lambda) : json(nullptr)},
              {"from_node", graph.node(route.path.source).id},
              {"to_node", graph.node(route.path.target).id},
              {"geometry", line_string(route.geometry)},
              {"duration_s", route.duration_s},
              {"distance_m", route.distance_m},
              {"mean_happiness", route.mean_happiness ? finite_or_null(*route.mean_happiness) : json(nullptr)},
              {"edges", std::move(edges)},
              {"instructions", std::move(instructions)},
              {"compute_ms", compute_ms}};
}

ApiResponse error_response(int status, std::string_view message) {
  return {status, json{{"error", std::string(message)}, {"code", status}}.dump()};
}

Api::Api(std::shared_ptr<const RoutePlanner> planner, Clock clock)
    : planner_(std::move(planner)), clock_(std::move(clock)) {
  if (!planner_) throw ValidationError("api needs a planner");
  if (!clock_) {
    clock_ = [] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
  }
}

ApiResponse Api::health() const {
  json modes = json::array({"fastest"});
  if (planner_->happy_ready()) modes.push_back("happy");
  const EmotionLayer* layer = planner_->layer();
  return ok(json{{"status", "ok"},
                 {"graph_edges", planner_->graph().edge_count()},
                 {"graph_fingerprint", to_hex(planner_->graph().fingerprint())},
                 {"layer_fingerprint", layer ? json(to_hex(fnv1a64(layer_to_csv(*layer)))) : json(nullptr)},
                 {"modes_ready", std::move(modes)},
                 {"lambda_grid", planner_->lambda_grid()}});
}

ApiResponse Api::route(const QueryParams& q) const {
  RouteMode mode = RouteMode::happy;
  double lambda = kDefaultLambda;
  NodeIndex s = 0;
  NodeIndex t = 0;
  try {
    const GeoPoint from = parse_point(q, "from");
    const GeoPoint to = parse_point(q, "to");
    if (const auto it = q.find("mode"); it != q.end()) mode = parse_route_mode(it->second);
    lambda = parse_lambda(q);
    s = nearest_node_index(planner_->graph(), from);
    t = nearest_node_index(planner_->graph(), to);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  if (mode == RouteMode::happy && !planner_->happy_ready()) {
    return error_response(409, "happy routing requires an emotion layer");
  }
  try {
    const double start = clock_();
    const Route r = planner_->route(s, t, mode, lambda);
    const double elapsed = std::max(0.0, clock_() - start);
    return ok(route_json(r, planner_->graph(), mode, lambda, elapsed));
  } catch (const NoRouteError& e) {
    return error_response(404, e.what());
  }
}

ApiResponse Api::layer(const QueryParams& q) const {
  BoundingBox box;
  try {
    const auto it = q.find("bbox");
    if (it == q.end()) throw ValidationError("missing parameter 'bbox'");
    const auto v = parse_list(it->second, 4, "bbox");
    box = BoundingBox{v[1], v[0], v[3], v[2]};
    if (box.min_lon > box.max_lon || box.min_lat > box.max_lat) throw ValidationError("bbox min exceeds max");
    if (box.min_lat < -90.0 || box.max_lat > 90.0 || box.min_lon < -180.0 || box.max_lon > 180.0) {
      throw ValidationError("bbox out of range");
    }
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  const EmotionLayer* layer = planner_->layer();
  if (layer == nullptr) return error_response(409, "no emotion layer loaded");
  json features = json::array();
  for (const RoadEdge& edge : planner_->graph().edges()) {
    if (!edge_hits_box(edge, box)) continue;
    const EdgeEmotion& em = (*layer)[edge.id];
    features.push_back(json{{"type", "Feature"},
                            {"geometry", line_string(edge.geometry)},
                            {"properties",
                             {{"edge_id", edge.id},
                              {"e", em.e},
                              {"c", em.c},
                              {"road_type", std::string(to_string(edge.road_type))}}}});
  }
  return ok(json{{"type", "FeatureCollection"}, {"features", std::move(features)}});
}

ApiResponse Api::compare(const QueryParams& q) const {
  double lambda = kDefaultLambda;
  NodeIndex s = 0;
  NodeIndex t = 0;
  try {
    const GeoPoint from = parse_point(q, "from");
    const GeoPoint to = parse_point(q, "to");
    lambda = parse_lambda(q);
    s = nearest_node_index(planner_->graph(), from);
    t = nearest_node_index(planner_->graph(), to);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  if (!planner_->happy_ready()) return error_response(409, "happy routing requires an emotion layer");
  try {
    const double t0 = clock_();
    const Route fastest = planner_->route(s, t, RouteMode::fastest, lambda);
    const double t1 = clock_();
    const Route happy = planner_->route(s, t, RouteMode::happy, lambda);
    const double t2 = clock_();
    const double overlap = (fastest.empty() && happy.empty()) ? 100.0 : route_overlap(fastest, happy);
    return ok(json{{"lambda", lambda},
                   {"fastest", route_json(fastest, planner_->graph(), RouteMode::fastest, lambda, std::max(0.0, t1 - t0))},
                   {"happy", route_json(happy, planner_->graph(), RouteMode::happy, lambda, std::max(0.0, t2 - t1))},
                   {"overlap_pct", overlap},
                   {"duration_delta_s", happy.duration_s - fastest.duration_s}});
  } catch (const NoRouteError& e) {
    return error_response(404, e.what());
  }
}

ApiResponse Api::dispatch(std::string_view path, const QueryParams& q) const {
  if (path == "/health") return health();
  if (path == "/route") return route(q);
  if (path == "/layer") return layer(q);
  if (path == "/compare") return compare(q);
  return error_response(404, "not found");
}

void run_server(const Api& api, const ServerOptions& options, const std::atomic<bool>& stop,
                const std::function<void(int)>& bound) {
  httplib::Server server;
  const int threads = std::max(1, options.threads);
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  const std::string origin = options.cors_origin;
  server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (!origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  });
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  for (const char* path : {"/health", "/route", "/layer", "/compare"}) {
    server.Get(path, [&api, path](const httplib::Request& req, httplib::Response& res) {
      QueryParams q;
      for (const auto& [k, v] : req.params) q.emplace(k, v);
      const ApiResponse r = api.dispatch(path, q);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
  }
  if (options.ui_dir && !server.set_mount_point("/ui", *options.ui_dir)) {
    throw ServiceError("cannot serve ui directory " + *options.ui_dir);
  }
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const ApiResponse r = error_response(res.status, res.status == 404 ? "not found" : "request failed");
      res.set_content(r.body, "application/json");
    }
  });

  // The library default enables SO_REUSEPORT, which lets a second server share a busy port.
  server.set_socket_options([](auto sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  int port = options.port;
  if (port == 0) {
    port = server.bind_to_any_port(options.host);
    if (port < 0) throw ServiceError("cannot bind " + options.host + ":0");
  } else if (!server.bind_to_port(options.host, port)) {
    throw ServiceError("cannot bind " + options.host + ":" + std::to_string(port) + " (address in use?)");
  }
  std::atomic<bool> finished{false};
  std::thread watcher([&] {
    while (!stop.load() && !finished.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  // The socket is bound, so clients may connect before the accept loop runs.
  if (bound) bound(port);
  const bool clean = server.listen_after_bind();
  finished.store(true);
  watcher.join();
  if (!clean && !stop.load()) throw ServiceError("server stopped unexpectedly");
}

}  // namespace affect_router
