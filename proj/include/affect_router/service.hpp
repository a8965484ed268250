#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "affect_router/emotion_layer.hpp"
#include "affect_router/road_graph.hpp"
#include "affect_router/routing.hpp"

namespace affect_router {

enum class RouteMode : std::uint8_t { fastest, happy };
std::string_view to_string(RouteMode mode) noexcept;
RouteMode parse_route_mode(std::string_view name);

inline constexpr double kDefaultLambda = 20.0;

/// Immutable routing state: graph, optional layer, and one contraction
/// hierarchy for fastest plus one per grid lambda for happy routing. Off-grid
/// lambdas are answered with Dijkstra. Safe to share across threads.
class RoutePlanner {
 public:
  RoutePlanner(std::shared_ptr<const RoadGraph> graph, std::shared_ptr<const EmotionLayer> layer,
               std::vector<double> lambda_grid);

  const RoadGraph& graph() const noexcept { return *graph_; }
  const EmotionLayer* layer() const noexcept { return layer_.get(); }
  bool happy_ready() const noexcept { return layer_ != nullptr; }
  const std::vector<double>& lambda_grid() const noexcept { return grid_; }
  bool on_grid(double lambda) const noexcept;

  /// Throws NoRouteError, and ValidationError for happy mode without a layer.
  Route route(NodeIndex source, NodeIndex target, RouteMode mode, double lambda) const;

 private:
  struct Indexed {
    WeightedView view;
    CHIndex ch;
  };

  std::shared_ptr<const RoadGraph> graph_;
  std::shared_ptr<const EmotionLayer> layer_;
  std::vector<double> grid_;
  std::optional<Indexed> fastest_;
  std::map<double, Indexed> happy_;
};

/// JSON for a computed route, as served by /route.
nlohmann::json route_json(const Route& route, const RoadGraph& graph, RouteMode mode, double lambda,
                          double compute_ms);

struct ApiResponse {
  int status = 200;
  std::string body;
};

using QueryParams = std::map<std::string, std::string, std::less<>>;

/// HTTP semantics without the transport: every handler is a pure function of
/// the snapshot and the query (plus the injected clock for compute_ms).
class Api {
 public:
  using Clock = std::function<double()>;  // milliseconds, monotonic

  explicit Api(std::shared_ptr<const RoutePlanner> planner, Clock clock = {});

  ApiResponse health() const;
  ApiResponse route(const QueryParams& q) const;
  ApiResponse layer(const QueryParams& q) const;
  ApiResponse compare(const QueryParams& q) const;
  /// Routes a GET path to its handler; 404 for unknown paths.
  ApiResponse dispatch(std::string_view path, const QueryParams& q) const;

 private:
  std::shared_ptr<const RoutePlanner> planner_;
  Clock clock_;
};

ApiResponse error_response(int status, std::string_view message);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 8;
  std::string cors_origin = "*";
  std::optional<std::string> ui_dir;
};

/// Serves until stop is set (checked every 100 ms), then drains in-flight
/// requests. bound(port) is called once listening. Throws ServiceError when
/// the address cannot be bound.
void run_server(const Api& api, const ServerOptions& options, const std::atomic<bool>& stop,
                const std::function<void(int)>& bound = {});

}  // namespace affect_router
