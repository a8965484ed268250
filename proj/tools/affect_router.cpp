// affect-router: command-line entry point.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "affect_router/analysis.hpp"
#include "affect_router/config.hpp"
#include "affect_router/emotion_model.hpp"
#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"
#include "affect_router/osm.hpp"
#include "affect_router/service.hpp"
#include "affect_router/synthetic.hpp"

namespace fs = std::filesystem;
using namespace affect_router;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNoRoute = 4, kSimulation = 5, kService = 6 };

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename T>
T pick(const std::optional<T>& flag, const std::optional<T>& configured, const char* name) {
  if (flag) return *flag;
  if (configured) return *configured;
  throw UsageError(std::string("missing ") + name + " (pass the flag or set it in the config)");
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("malformed lambda list: '" + text + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

GeoPoint parse_coordinate(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("malformed coordinate '" + text + "' (expected lat,lon)");
  try {
    std::size_t a = 0;
    std::size_t b = 0;
    const std::string lat = text.substr(0, comma);
    const std::string lon = text.substr(comma + 1);
    const double la = std::stod(lat, &a);
    const double lo = std::stod(lon, &b);
    if (a != lat.size() || b != lon.size()) throw std::invalid_argument(text);
    return GeoPoint(la, lo);
  } catch (const std::exception&) {
    throw UsageError("malformed coordinate '" + text + "' (expected lat,lon)");
  }
}

struct Summary {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

// Nearest-rank percentiles.
Summary latency_summary(std::vector<double> ms) {
  Summary s;
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size())));
    return ms[std::max<std::size_t>(k, 1) - 1];
  };
  s.mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  s.p50 = rank(0.50);
  s.p95 = rank(0.95);
  s.max = ms.back();
  return s;
}

nlohmann::json summary_json(const Summary& s) {
  return {{"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}, {"max_ms", s.max}};
}

struct Common {
  std::optional<std::string> config_path;
  Config config;

  void load() {
    const auto path = resolve_config_path(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
    if (path) config = load_config(*path);
  }
};

std::optional<fs::path> as_path(const std::optional<std::string>& s) {
  return s ? std::optional<fs::path>(fs::path(*s)) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-aware route planning"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "TOML config (default: $AFFECT_ROUTER_CONFIG)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse an OSM XML extract into a graph file");
  std::optional<std::string> ingest_osm;
  std::optional<std::string> ingest_out;
  ingest->add_option("osm", ingest_osm, "OSM XML (.osm or .osm.gz)");
  ingest->add_option("out", ingest_out, "Output graph (.json or .json.gz)");

  // build-layer
  auto* build = app.add_subcommand("build-layer", "Score every edge into an emotion layer");
  std::optional<std::string> build_graph_path;
  std::optional<std::string> build_model;
  std::optional<std::string> build_out;
  std::optional<std::string> build_timestamp;
  bool build_heuristic = false;
  build->add_option("--graph", build_graph_path, "Graph file");
  build->add_option("--model", build_model, "Forest model (JSON)");
  build->add_flag("--heuristic", build_heuristic, "Use the built-in heuristic scorer instead of a model");
  build->add_option("--out", build_out, "Output layer CSV");
  build->add_option("--timestamp", build_timestamp, "Local time of the trip, YYYY-MM-DDTHH:MM:SS");

  // route
  auto* route = app.add_subcommand("route", "Compute one route");
  std::optional<std::string> route_graph;
  std::optional<std::string> route_layer;
  std::string route_from;
  std::string route_to;
  std::string route_mode = "happy";
  std::optional<double> route_lambda;
  std::optional<std::string> route_geojson;
  bool route_json_out = false;
  route->add_option("--graph", route_graph, "Graph file");
  route->add_option("--layer", route_layer, "Emotion layer CSV");
  route->add_option("--from", route_from, "Origin lat,lon")->required();
  route->add_option("--to", route_to, "Destination lat,lon")->required();
  route->add_option("--mode", route_mode, "fastest or happy");
  route->add_option("--lambda", route_lambda, "Happiness weighing factor (default 20)");
  route->add_option("--geojson", route_geojson, "Write the route geometry as GeoJSON");
  route->add_flag("--json", route_json_out, "Print the full route as JSON");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Fastest vs happy routes over random OD pairs");
  std::optional<std::string> sim_graph;
  std::optional<std::string> sim_layer;
  std::optional<std::size_t> sim_n;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_lambda;
  std::optional<std::string> sim_mode;
  std::optional<double> sim_min_sep;
  std::string sim_out = "sim-out";
  simulate->add_option("--graph", sim_graph, "Graph file");
  simulate->add_option("--layer", sim_layer, "Emotion layer CSV");
  simulate->add_option("--n", sim_n, "Number of OD pairs");
  simulate->add_option("--seed", sim_seed, "Sampling seed");
  simulate->add_option("--lambda", sim_lambda, "Happiness weighing factor");
  simulate->add_option("--mode", sim_mode, "Weight mode for the happy route");
  simulate->add_option("--min-separation", sim_min_sep, "Minimum OD distance in metres");
  simulate->add_option("--out", sim_out, "Output directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Happy vs fastest durations across lambda values");
  std::optional<std::string> sweep_graph;
  std::optional<std::string> sweep_layer;
  std::optional<std::string> sweep_lambdas;
  std::optional<std::uint64_t> sweep_seed;
  std::optional<std::size_t> sweep_n;
  std::optional<double> sweep_min_sep;
  std::string sweep_out = "sim-out";
  sweep->add_option("--graph", sweep_graph, "Graph file");
  sweep->add_option("--layer", sweep_layer, "Emotion layer CSV");
  sweep->add_option("--lambdas", sweep_lambdas, "Comma-separated lambda values");
  sweep->add_option("--pairs-seed", sweep_seed, "Seed for the fixed OD pairs");
  sweep->add_option("--n", sweep_n, "Number of OD pairs");
  sweep->add_option("--min-separation", sweep_min_sep, "Minimum OD distance in metres");
  sweep->add_option("--out", sweep_out, "Output directory (sweep.csv)");

  // bench
  auto* bench = app.add_subcommand("bench", "Query latency and preprocessing time");
  std::optional<std::string> bench_graph;
  std::optional<std::string> bench_layer;
  std::size_t bench_queries = 200;
  std::uint64_t bench_seed = 1;
  double bench_lambda = kDefaultLambda;
  bool bench_json = false;
  bench->add_option("--graph", bench_graph, "Graph file");
  bench->add_option("--layer", bench_layer, "Emotion layer CSV (built with constant providers when absent)");
  bench->add_option("--queries", bench_queries, "Number of queries per mode");
  bench->add_option("--seed", bench_seed, "Query sampling seed");
  bench->add_option("--lambda", bench_lambda, "Lambda for happy queries");
  bench->add_flag("--json", bench_json, "Print results as JSON");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::optional<std::string> serve_listen;
  serve->add_option("--listen", serve_listen, "host:port");

  // synth-city
  auto* synth = app.add_subcommand("synth-city", "Generate a synthetic grid city bundle");
  CityOptions city;
  std::string synth_out = ".";
  double synth_mpp = 10.0;
  int synth_zoom = 14;
  synth->add_option("--rows", city.rows, "Grid rows");
  synth->add_option("--cols", city.cols, "Grid columns");
  synth->add_option("--spacing", city.spacing_m, "Block size in metres");
  synth->add_option("--seed", city.seed, "Generator seed");
  synth->add_option("--raster-resolution", synth_mpp, "Metres per raster pixel");
  synth->add_option("--tile-zoom", synth_zoom, "Zoom of the tile CSV");
  synth->add_option("--out-dir", synth_out, "Directory for city.osm, green.png, green.pgw, tiles.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    common.load();
    const Config& cfg = common.config;

    if (*ingest) {
      const fs::path osm = pick(as_path(ingest_osm), cfg.paths.osm, "osm input");
      const fs::path out = pick(as_path(ingest_out), cfg.paths.graph, "output graph");
      const auto source = parse_osm_xml(read_file_maybe_gzip(osm));
      for (const auto& w : source.warnings) std::cerr << "warning: " << w << "\n";
      const RoadGraph graph = build_graph(source);
      save_graph(graph, out);
      std::cout << "nodes " << graph.node_count() << "\nedges " << graph.edge_count() << "\nfingerprint "
                << to_hex(graph.fingerprint()) << "\n";
      return kOk;
    }

    if (*build) {
      const fs::path graph_path = pick(as_path(build_graph_path), cfg.paths.graph, "graph");
      const fs::path out = pick(as_path(build_out), cfg.paths.layer, "output layer");
      std::shared_ptr<const DecisionForest> forest;
      if (!build_heuristic) {
        const fs::path model = pick(as_path(build_model), cfg.paths.model, "model (or --heuristic)");
        forest = std::make_shared<const DecisionForest>(load_model_file(model));
      }
      const RoadGraph graph = load_graph(graph_path);
      const ProviderSet providers = make_providers(cfg);
      const LocalTimestamp at = build_timestamp ? LocalTimestamp::parse(*build_timestamp) : cfg.context.timestamp;
      const EmotionScorer scorer(forest);
      const EmotionLayer layer = build_layer(graph, providers, scorer, cfg.context.profile, at);
      save_layer(layer, out);
      double lo = 1.0;
      double hi = 0.0;
      double sum = 0.0;
      for (const auto& e : layer.edges()) {
        lo = std::min(lo, e.e);
        hi = std::max(hi, e.e);
        sum += e.e;
      }
      std::printf("edges %zu\nmodel %s\ne_min %.9g\ne_mean %.9g\ne_max %.9g\n", layer.size(), scorer.id().c_str(), lo,
                  layer.size() ? sum / static_cast<double>(layer.size()) : 0.0, hi);
      return kOk;
    }

    if (*route) {
      const RouteMode mode = parse_route_mode(route_mode);
      const double lambda = route_lambda.value_or(kDefaultLambda);
      if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
      const GeoPoint from = parse_coordinate(route_from);
      const GeoPoint to = parse_coordinate(route_to);
      auto graph = std::make_shared<const RoadGraph>(load_graph(pick(as_path(route_graph), cfg.paths.graph, "graph")));
      std::shared_ptr<const EmotionLayer> layer;
      if (const auto lp = route_layer ? std::optional<fs::path>(*route_layer) : cfg.paths.layer) {
        layer = std::make_shared<const EmotionLayer>(load_layer(*lp, *graph));
      }
      if (mode == RouteMode::happy && !layer) throw UsageError("happy routing needs --layer");
      // Same index choice as the server: contraction hierarchy for grid lambdas, Dijkstra otherwise.
      std::vector<double> grid;
      const auto& g = cfg.service.lambda_grid;
      if (mode == RouteMode::happy && std::find(g.begin(), g.end(), lambda) != g.end()) grid.push_back(lambda);
      const RoutePlanner planner(graph, layer, grid);
      const Route r = planner.route(nearest_node_index(*graph, from), nearest_node_index(*graph, to), mode, lambda);
      const auto doc = route_json(r, *graph, mode, lambda, 0.0);
      if (route_geojson) {
        nlohmann::json feature{{"type", "Feature"},
                               {"geometry", doc["geometry"]},
                               {"properties",
                                {{"mode", doc["mode"]},
                                 {"lambda", doc["lambda"]},
                                 {"duration_s", r.duration_s},
                                 {"distance_m", r.distance_m}}}};
        write_file(*route_geojson, feature.dump(2) + "\n");
      }
      if (route_json_out) {
        std::cout << doc.dump(2) << "\n";
        return kOk;
      }
      std::printf("duration_s %.17g\ndistance_m %.17g\n", r.duration_s, r.distance_m);
      if (r.mean_happiness) {
        std::printf("mean_happiness %.9g\n", *r.mean_happiness);
      } else {
        std::printf("mean_happiness n/a\n");
      }
      std::printf("edges %zu\n", r.path.edges.size());
      for (const auto& t : turn_instructions(r, *graph)) {
        std::printf("%-10s node %lld  %-12s %+.1f\n", std::string(to_string(t.kind)).c_str(),
                    static_cast<long long>(t.node_id), std::string(to_string(t.road_type)).c_str(),
                    t.bearing_change_deg);
      }
      return kOk;
    }

    if (*simulate || *sweep) {
      const bool is_sim = simulate->parsed();
      const fs::path graph_path = pick(as_path(is_sim ? sim_graph : sweep_graph), cfg.paths.graph, "graph");
      const fs::path layer_path = pick(as_path(is_sim ? sim_layer : sweep_layer), cfg.paths.layer, "layer");
      const RoadGraph graph = load_graph(graph_path);
      const EmotionLayer layer = load_layer(layer_path, graph);
      const ProviderSet providers = make_providers(cfg);
      const auto characteristics = edge_characteristics(graph, providers);
      SimulationOptions options;
      options.characteristics = characteristics;
      if (is_sim) {
        options.min_separation_m = sim_min_sep.value_or(cfg.simulation.min_separation_m);
        WeightParams params = cfg.weights;
        if (sim_mode) params.mode = parse_weight_mode(*sim_mode);
        if (sim_lambda) params.lambda = *sim_lambda;
        const auto report = run_simulation(graph, layer, params, sim_n.value_or(cfg.simulation.n),
                                           sim_seed.value_or(cfg.simulation.seed), options);
        write_report(report, sim_out);
        std::printf("pairs %zu\nskipped %zu\nmean_overlap_pct %.6g\n", report.rows.size(), report.skipped,
                    report.mean_overlap_pct);
        if (report.regression) {
          std::printf("slope %.9g\nr_squared %.9g\n", report.regression->slope, report.regression->r_squared);
        }
        std::printf("wrote %s\n", (fs::path(sim_out) / "report.json").string().c_str());
      } else {
        options.min_separation_m = sweep_min_sep.value_or(cfg.simulation.min_separation_m);
        const auto lambdas = sweep_lambdas ? parse_lambdas(*sweep_lambdas) : cfg.simulation.lambdas;
        const auto pairs = sample_od_pairs(graph, sweep_n.value_or(cfg.simulation.n),
                                           sweep_seed.value_or(cfg.simulation.seed), options.min_separation_m);
        const auto rows = lambda_sweep(graph, layer, lambdas, pairs, options);
        fs::create_directories(sweep_out);
        const std::string csv = sweep_csv(rows);
        write_file(fs::path(sweep_out) / "sweep.csv", csv);
        std::cout << csv;
      }
      return kOk;
    }

    if (*bench) {
      const RoadGraph graph = load_graph(pick(as_path(bench_graph), cfg.paths.graph, "graph"));
      double layer_build_s = -1.0;
      EmotionLayer layer;
      if (const auto lp = bench_layer ? std::optional<fs::path>(*bench_layer) : cfg.paths.layer) {
        layer = load_layer(*lp, graph);
      } else {
        const auto start = std::chrono::steady_clock::now();
        layer = build_layer(graph, ProviderSet::constant({}, {}, 0.3), EmotionScorer(), cfg.context.profile,
                            cfg.context.timestamp);
        layer_build_s = seconds_since(start);
      }
      auto start = std::chrono::steady_clock::now();
      const WeightedView fastest_view = apply_weights(graph, layer, WeightParams{WeightMode::fastest, 0.0});
      const CHIndex fastest_ch = ch_preprocess(graph, fastest_view);
      const double fastest_pre_s = seconds_since(start);
      start = std::chrono::steady_clock::now();
      const WeightedView happy_view = apply_weights(graph, layer, WeightParams{WeightMode::happy_linear, bench_lambda});
      const CHIndex happy_ch = ch_preprocess(graph, happy_view);
      const double happy_pre_s = seconds_since(start);
      const auto pairs = sample_od_pairs(graph, bench_queries, bench_seed, 0.0);
      std::vector<double> fastest_ms;
      std::vector<double> happy_ms;
      for (const auto& p : pairs) {
        auto t0 = std::chrono::steady_clock::now();
        (void)assemble_route(ch_query(fastest_ch, fastest_view, p.origin, p.destination), graph, &layer);
        fastest_ms.push_back(seconds_since(t0) * 1000.0);
        t0 = std::chrono::steady_clock::now();
        (void)assemble_route(ch_query(happy_ch, happy_view, p.origin, p.destination), graph, &layer);
        happy_ms.push_back(seconds_since(t0) * 1000.0);
      }
      const Summary fs_ = latency_summary(fastest_ms);
      const Summary hs = latency_summary(happy_ms);
      if (bench_json) {
        nlohmann::json doc{{"nodes", graph.node_count()},
                           {"edges", graph.edge_count()},
                           {"queries", pairs.size()},
                           {"lambda", bench_lambda},
                           {"layer_build_s", layer_build_s >= 0.0 ? nlohmann::json(layer_build_s) : nlohmann::json()},
                           {"ch_preprocess_fastest_s", fastest_pre_s},
                           {"ch_preprocess_happy_s", happy_pre_s},
                           {"shortcuts_fastest", fastest_ch.shortcut_count()},
                           {"shortcuts_happy", happy_ch.shortcut_count()},
                           {"fastest", summary_json(fs_)},
                           {"happy", summary_json(hs)}};
        std::cout << doc.dump(2) << "\n";
      } else {
        std::printf("graph %zu nodes, %zu edges; %zu queries, lambda %g\n", graph.node_count(), graph.edge_count(),
                    pairs.size(), bench_lambda);
        if (layer_build_s >= 0.0) std::printf("layer build (constant providers) %.3f s\n", layer_build_s);
        std::printf("ch preprocessing fastest %.3f s (%zu shortcuts), happy %.3f s (%zu shortcuts)\n", fastest_pre_s,
                    fastest_ch.shortcut_count(), happy_pre_s, happy_ch.shortcut_count());
        std::printf("fastest query ms: mean %.3f p50 %.3f p95 %.3f\n", fs_.mean, fs_.p50, fs_.p95);
        std::printf("happy query ms:   mean %.3f p50 %.3f p95 %.3f\n", hs.mean, hs.p50, hs.p95);
      }
      return kOk;
    }

    if (*serve) {
      const ListenAddress listen = parse_listen(serve_listen.value_or(cfg.service.listen));
      auto graph = std::make_shared<const RoadGraph>(load_graph(pick(std::optional<fs::path>(), cfg.paths.graph, "graph")));
      std::shared_ptr<const EmotionLayer> layer;
      if (cfg.paths.layer && fs::exists(*cfg.paths.layer)) {
        layer = std::make_shared<const EmotionLayer>(load_layer(*cfg.paths.layer, *graph));
      } else {
        std::cerr << "warning: no emotion layer, serving fastest mode only\n";
      }
      const auto start = std::chrono::steady_clock::now();
      auto planner = std::make_shared<const RoutePlanner>(graph, layer, cfg.service.lambda_grid);
      std::cerr << "indexes ready in " << seconds_since(start) << " s\n";
      const Api api(planner);
      ServerOptions options;
      options.host = listen.host;
      options.port = listen.port;
      options.threads = cfg.service.threads;
      options.cors_origin = cfg.service.cors_origin;
      if (cfg.paths.ui) options.ui_dir = cfg.paths.ui->string();
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      run_server(api, options, g_stop, [&](int port) {
        std::cout << "listening on " << listen.host << ":" << port << std::endl;
      });
      std::cout << "stopped" << std::endl;
      return kOk;
    }

    if (*synth) {
      const fs::path dir(synth_out);
      fs::create_directories(dir);
      write_file(dir / "city.osm", make_city_osm(city));
      const CityRaster raster = make_city_raster(city, synth_mpp);
      save_png_rgb(dir / "green.png", raster.width, raster.height, raster.rgb);
      write_file(dir / "green.pgw", world_file_text(raster.transform));
      write_file(dir / "tiles.csv", make_city_tiles_csv(city, synth_zoom));
      std::printf("wrote %s\n", dir.string().c_str());
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NoRouteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoRoute;
  } catch (const SimulationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSimulation;
  } catch (const ServiceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kService;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
