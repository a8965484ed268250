#include "affect_router/config.hpp"

#include <toml.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "affect_router/error.hpp"

namespace affect_router {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"paths", {"graph", "layer", "model", "osm", "raster", "world_file", "tiles", "ui"}},
      {"context",
       {"timestamp", "age", "before_emotion", "tile_zoom", "green_window_px", "feeltemp_outside", "windspeed",
        "cloud_coverage", "weather_term", "freeflow_speed", "reducedspeed", "greenness"}},
      {"weights", {"mode", "lambda"}},
      {"service", {"listen", "lambda_grid", "cors_origin", "threads"}},
      {"simulation", {"n", "seed", "min_separation_m", "lambdas"}},
  };
  return s;
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }


double get_number(const toml::table& t, const std::string& section, const std::string& key, double fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->value<double>()) return *v;  // integers convert too
  throw UsageError("config " + where(section, key) + ": expected a number");
}

long long get_integer(const toml::table& t, const std::string& section, const std::string& key, long long fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->as_integer()) return v->get();
  throw UsageError("config " + where(section, key) + ": expected an integer");
}

std::optional<std::string> get_string(const toml::table& t, const std::string& section, const std::string& key) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return std::nullopt;
  if (auto v = n->as_string()) return v->get();
  throw UsageError("config " + where(section, key) + ": expected a string");
}

std::optional<std::vector<double>> get_numbers(const toml::table& t, const std::string& section,
                                               const std::string& key) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return std::nullopt;
  const toml::array* arr = n->as_array();
  if (arr == nullptr) throw UsageError("config " + where(section, key) + ": expected an array of numbers");
  std::vector<double> out;
  for (const toml::node& item : *arr) {
    auto v = item.value<double>();
    if (!v) throw UsageError("config " + where(section, key) + ": expected an array of numbers");
    out.push_back(*v);
  }
  return out;
}

std::optional<std::filesystem::path> get_path(const toml::table& t, const std::string& key,
                                              const std::filesystem::path& base) {
  auto s = get_string(t, "paths", key);
  if (!s) return std::nullopt;
  std::filesystem::path p(*s);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

template <typename F>
void translate(const std::string& what, F&& f) {
  try {
    f();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError("config " + what + ": " + e.what());
  }
}

}  // namespace

void Config::validate() const {
  translate("[weights]", [&] { weights.validate(); });
  translate("[context]", [&] {
    context.profile.validate();
    context.weather.validate();
    context.traffic.validate();
  });
  if (context.tile_zoom < 0 || context.tile_zoom > 22) throw UsageError("config [context] tile_zoom: out of range");
  if (context.green_window_px < 1) throw UsageError("config [context] green_window_px: must be >= 1");
  if (!(context.greenness >= 0.0 && context.greenness <= 1.0)) {
    throw UsageError("config [context] greenness: must be in [0, 1]");
  }
  for (double l : service.lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("config [service] lambda_grid: values must be >= 0");
  }
  if (service.threads < 1) throw UsageError("config [service] threads: must be >= 1");
  parse_listen(service.listen);
  if (!(simulation.min_separation_m >= 0.0)) throw UsageError("config [simulation] min_separation_m: must be >= 0");
  for (double l : simulation.lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("config [simulation] lambdas: values must be >= 0");
  }
  if (paths.raster.has_value() != paths.world_file.has_value()) {
    throw UsageError("config [paths]: raster and world_file must be given together");
  }
  for (const auto& p : {paths.model, paths.osm, paths.raster, paths.world_file, paths.tiles}) {
    if (p && !std::filesystem::exists(*p)) throw UsageError("config [paths]: missing file " + p->string());
  }
  if (paths.ui && !std::filesystem::is_directory(*paths.ui)) {
    throw UsageError("config [paths] ui: not a directory: " + paths.ui->string());
  }
}

Config parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw UsageError(msg.str());
  }
  for (const auto& [key, node] : root) {
    const std::string name(key.str());
    const auto it = schema().find(name);
    if (it == schema().end()) throw UsageError("config: unknown section [" + name + "]");
    if (!node.is_table()) throw UsageError("config: [" + name + "] must be a table");
    for (const auto& [sub, subnode] : *node.as_table()) {
      if (!it->second.contains(std::string(sub.str()))) {
        throw UsageError("config: unknown key " + where(name, std::string(sub.str())));
      }
    }
  }

  Config c;
  c.base_dir = base_dir;
  const toml::table empty;
  auto section = [&](const char* name) -> const toml::table& {
    const toml::table* t = root[name].as_table();
    return t != nullptr ? *t : empty;
  };

  const toml::table& paths = section("paths");
  c.paths.graph = get_path(paths, "graph", base_dir);
  c.paths.layer = get_path(paths, "layer", base_dir);
  c.paths.model = get_path(paths, "model", base_dir);
  c.paths.osm = get_path(paths, "osm", base_dir);
  c.paths.raster = get_path(paths, "raster", base_dir);
  c.paths.world_file = get_path(paths, "world_file", base_dir);
  c.paths.tiles = get_path(paths, "tiles", base_dir);
  c.paths.ui = get_path(paths, "ui", base_dir);

  const toml::table& ctx = section("context");
  translate("[context]", [&] {
    if (auto ts = get_string(ctx, "context", "timestamp")) c.context.timestamp = LocalTimestamp::parse(*ts);
    c.context.profile.age = static_cast<int>(get_integer(ctx, "context", "age", c.context.profile.age));
    if (auto e = get_string(ctx, "context", "before_emotion")) c.context.profile.before_emotion = parse_emotion(*e);
    c.context.tile_zoom = static_cast<int>(get_integer(ctx, "context", "tile_zoom", c.context.tile_zoom));
    c.context.green_window_px =
        static_cast<int>(get_integer(ctx, "context", "green_window_px", c.context.green_window_px));
    auto& w = c.context.weather;
    w.feeltemp_outside = get_number(ctx, "context", "feeltemp_outside", w.feeltemp_outside);
    w.windspeed = get_number(ctx, "context", "windspeed", w.windspeed);
    w.cloud_coverage = get_number(ctx, "context", "cloud_coverage", w.cloud_coverage);
    if (auto term = get_string(ctx, "context", "weather_term")) w.weather_term = parse_weather_term(*term);
    auto& tr = c.context.traffic;
    tr.freeflow_speed = get_number(ctx, "context", "freeflow_speed", tr.freeflow_speed);
    tr.reducedspeed = get_number(ctx, "context", "reducedspeed", tr.reducedspeed);
    c.context.greenness = get_number(ctx, "context", "greenness", c.context.greenness);
  });

  const toml::table& weights = section("weights");
  translate("[weights]", [&] {
    if (auto m = get_string(weights, "weights", "mode")) c.weights.mode = parse_weight_mode(*m);
    c.weights.lambda = get_number(weights, "weights", "lambda", c.weights.lambda);
  });

  const toml::table& service = section("service");
  if (auto v = get_string(service, "service", "listen")) c.service.listen = *v;
  if (auto v = get_numbers(service, "service", "lambda_grid")) c.service.lambda_grid = *v;
  if (auto v = get_string(service, "service", "cors_origin")) c.service.cors_origin = *v;
  c.service.threads = static_cast<int>(get_integer(service, "service", "threads", c.service.threads));

  const toml::table& sim = section("simulation");
  const long long n = get_integer(sim, "simulation", "n", static_cast<long long>(c.simulation.n));
  if (n < 0) throw UsageError("config [simulation] n: must be >= 0");
  c.simulation.n = static_cast<std::size_t>(n);
  const long long seed = get_integer(sim, "simulation", "seed", static_cast<long long>(c.simulation.seed));
  if (seed < 0) throw UsageError("config [simulation] seed: must be >= 0");
  c.simulation.seed = static_cast<std::uint64_t>(seed);
  c.simulation.min_separation_m = get_number(sim, "simulation", "min_separation_m", c.simulation.min_separation_m);
  if (auto v = get_numbers(sim, "simulation", "lambdas")) c.simulation.lambdas = *v;

  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("AFFECT_ROUTER_CONFIG"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

ListenAddress parse_listen(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw UsageError("listen address must be host:port");
  ListenAddress a;
  a.host = std::string(text.substr(0, colon));
  const std::string port(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    a.port = std::stoi(port, &used);
    if (used != port.size()) throw std::invalid_argument(port);
  } catch (const std::exception&) {
    throw UsageError("listen address has a malformed port: " + std::string(text));
  }
  if (a.port < 0 || a.port > 65535) throw UsageError("listen port out of range: " + std::string(text));
  return a;
}

ProviderSet make_providers(const Config& config) {
  ProviderSet set = ProviderSet::constant(config.context.weather, config.context.traffic, config.context.greenness);
  if (config.paths.tiles) {
    auto tiles = std::make_shared<const TileCsvProvider>(TileCsvProvider::load(*config.paths.tiles, config.context.tile_zoom));
    set.weather = tiles;
    set.traffic = tiles;
  }
  if (config.paths.raster) {
    auto raster = std::make_shared<const GreenRaster>(load_green_raster(*config.paths.raster, *config.paths.world_file));
    set.greenness = std::make_shared<const RasterGreennessProvider>(raster, config.context.green_window_px);
  }
  return set;
}

}  // namespace affect_router
