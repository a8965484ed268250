#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affect_router/context.hpp"
#include "affect_router/emotion_layer.hpp"

namespace affect_router {

/// Operator configuration, read from TOML. Relative paths resolve against the
/// config file's directory; unknown sections and keys are rejected.
///
///   [paths]       graph, layer, model, osm, raster, world_file, tiles, ui
///   [context]     timestamp, age, before_emotion, tile_zoom, green_window_px,
///                 feeltemp_outside, windspeed, cloud_coverage, weather_term,
///                 freeflow_speed, reducedspeed, greenness
///   [weights]     mode, lambda
///   [service]     listen, lambda_grid, cors_origin, threads
///   [simulation]  n, seed, min_separation_m, lambdas
struct Config {
  struct Paths {
    std::optional<std::filesystem::path> graph;
    std::optional<std::filesystem::path> layer;
    std::optional<std::filesystem::path> model;
    std::optional<std::filesystem::path> osm;
    std::optional<std::filesystem::path> raster;
    std::optional<std::filesystem::path> world_file;
    std::optional<std::filesystem::path> tiles;
    std::optional<std::filesystem::path> ui;
  } paths;

  struct Context {
    LocalTimestamp timestamp;
    PersonalProfile profile;
    int tile_zoom = 14;
    int green_window_px = 15;
    // Used when no tile CSV or raster is configured.
    WeatherInfo weather;
    TrafficInfo traffic;
    double greenness = 0.0;
  } context;

  WeightParams weights;

  struct Service {
    std::string listen = "127.0.0.1:8080";
    std::vector<double> lambda_grid{0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 100.0};
    std::string cors_origin = "*";
    int threads = 8;
  } service;

  struct Simulation {
    std::size_t n = 100;
    std::uint64_t seed = 1;
    double min_separation_m = 1000.0;
    std::vector<double> lambdas{0.0, 1.0, 5.0, 20.0, 40.0, 100.0};
  } simulation;

  std::filesystem::path base_dir = ".";

  void validate() const;
};

/// Throws UsageError on syntax errors, unknown keys, wrong types or missing
/// referenced input files (graph/layer are allowed to be absent: they are outputs too).
Config parse_config(std::string_view toml_text, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

/// Path from --config, else AFFECT_ROUTER_CONFIG, else none.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& flag);

struct ListenAddress {
  std::string host;
  int port = 0;
};
ListenAddress parse_listen(std::string_view text);

/// Tile CSV and raster when configured, constant providers otherwise.
ProviderSet make_providers(const Config& config);

}  // namespace affect_router
