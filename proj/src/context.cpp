#include "affect_router/context.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <nlohmann/json.hpp>
#include <sstream>

#include "affect_router/error.hpp"
#include "affect_router/graph_io.hpp"

namespace affect_router {

namespace {

constexpr std::array<std::string_view, kWeatherTermCount> kWeatherNames = {"clear", "clouds", "rain",
                                                                           "snow", "fog"};
constexpr std::array<std::string_view, kDaytimeCount> kDaytimeNames = {"morning", "afternoon",
                                                                       "evening", "night"};
constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "happy", "sad", "neutral", "angry", "contempt", "disgust", "fear", "surprise"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw ParseError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

bool finite_all(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

std::string_view to_string(WeatherTerm term) noexcept { return kWeatherNames[static_cast<std::size_t>(term)]; }
std::string_view to_string(Daytime daytime) noexcept { return kDaytimeNames[static_cast<std::size_t>(daytime)]; }
std::string_view to_string(Emotion emotion) noexcept { return kEmotionNames[static_cast<std::size_t>(emotion)]; }

WeatherTerm parse_weather_term(std::string_view name) {
  return parse_enum<WeatherTerm>(name, kWeatherNames, "weather_term");
}
Daytime parse_daytime(std::string_view name) { return parse_enum<Daytime>(name, kDaytimeNames, "daytime"); }
Emotion parse_emotion(std::string_view name) {
  if (name == "happiness") return Emotion::happy;
  return parse_enum<Emotion>(name, kEmotionNames, "emotion");
}

void WeatherInfo::validate() const {
  if (!finite_all({feeltemp_outside, windspeed, cloud_coverage})) throw ValidationError("weather: non-finite value");
  if (windspeed < 0.0) throw ValidationError("weather: windspeed must be >= 0");
  if (cloud_coverage < 0.0 || cloud_coverage > 100.0) throw ValidationError("weather: cloud_coverage outside [0,100]");
}

void TrafficInfo::validate() const {
  if (!finite_all({freeflow_speed, reducedspeed})) throw ValidationError("traffic: non-finite value");
  if (!(freeflow_speed > 0.0)) throw ValidationError("traffic: freeflow_speed must be > 0");
  if (reducedspeed < 0.0 || reducedspeed > freeflow_speed) {
    throw ValidationError("traffic: reducedspeed must lie in [0, freeflow_speed]");
  }
}

void PersonalProfile::validate() const {
  if (age < 16 || age > 120) throw ValidationError("profile: age outside [16,120]");
}

void ContextSnapshot::validate() const {
  weather.validate();
  traffic.validate();
  personal.validate();
  if (max_speed && !(*max_speed > 0.0 && std::isfinite(*max_speed))) throw ValidationError("snapshot: bad max_speed");
  if (n_lanes && *n_lanes <= 0) throw ValidationError("snapshot: bad n_lanes");
  if (!(satellite_greeness >= 0.0 && satellite_greeness <= 1.0)) {
    throw ValidationError("snapshot: satellite_greeness outside [0,1]");
  }
}

nlohmann::json to_json(const ContextSnapshot& s) {
  using nlohmann::json;
  return json{
      {"feeltemp_outside", s.weather.feeltemp_outside},
      {"windspeed", s.weather.windspeed},
      {"cloud_coverage", s.weather.cloud_coverage},
      {"weather_term", std::string(to_string(s.weather.weather_term))},
      {"freeflow_speed", s.traffic.freeflow_speed},
      {"reducedspeed", s.traffic.reducedspeed},
      {"road_type", std::string(to_string(s.road_type))},
      {"max_speed", s.max_speed ? json(*s.max_speed) : json(nullptr)},
      {"n_lanes", s.n_lanes ? json(*s.n_lanes) : json(nullptr)},
      {"satellite_greeness", s.satellite_greeness},
      {"daytime", std::string(to_string(s.daytime))},
      {"age", s.personal.age},
      {"before_emotion", std::string(to_string(s.personal.before_emotion))},
  };
}

ContextSnapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    ContextSnapshot s;
    s.weather.feeltemp_outside = j.at("feeltemp_outside").get<double>();
    s.weather.windspeed = j.at("windspeed").get<double>();
    s.weather.cloud_coverage = j.at("cloud_coverage").get<double>();
    s.weather.weather_term = parse_weather_term(j.at("weather_term").get<std::string>());
    s.traffic.freeflow_speed = j.at("freeflow_speed").get<double>();
    s.traffic.reducedspeed = j.at("reducedspeed").get<double>();
    s.road_type = parse_road_type(j.at("road_type").get<std::string>());
    if (!j.at("max_speed").is_null()) s.max_speed = j["max_speed"].get<double>();
    if (!j.at("n_lanes").is_null()) s.n_lanes = j["n_lanes"].get<int>();
    s.satellite_greeness = j.at("satellite_greeness").get<double>();
    s.daytime = parse_daytime(j.at("daytime").get<std::string>());
    s.personal.age = j.at("age").get<int>();
    s.personal.before_emotion = parse_emotion(j.at("before_emotion").get<std::string>());
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("snapshot: ") + e.what());
  }
}

LocalTimestamp LocalTimestamp::parse(std::string_view iso) {
  LocalTimestamp t;
  std::string text(iso);
  if (!text.empty() && text.back() == 'Z') text.pop_back();
  char sep = 0;
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &t.year, &t.month, &t.day, &sep, &t.hour,
                  &t.minute, &t.second, &consumed) != 7 ||
      static_cast<std::size_t>(consumed) != text.size() || (sep != 'T' && sep != ' ')) {
    throw ParseError("timestamp '" + std::string(iso) + "' is not YYYY-MM-DDTHH:MM:SS");
  }
  if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 || t.hour < 0 || t.hour > 23 || t.minute < 0 ||
      t.minute > 59 || t.second < 0 || t.second > 60) {
    throw ParseError("timestamp '" + std::string(iso) + "' out of range");
  }
  return t;
}

std::string LocalTimestamp::iso8601() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour, minute, second);
  return buf;
}

Daytime daytime_bucket(int local_hour) {
  if (local_hour < 0 || local_hour >= 24) throw ValidationError("hour outside [0,24)");
  if (local_hour >= 5 && local_hour < 12) return Daytime::morning;
  if (local_hour >= 12 && local_hour < 18) return Daytime::afternoon;
  if (local_hour >= 18 && local_hour < 22) return Daytime::evening;
  return Daytime::night;
}

// ---------------------------------------------------------------------------

WorldTransform WorldTransform::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  WorldTransform t;
  if (!(in >> t.a >> t.d >> t.b >> t.e >> t.c >> t.f)) throw ParseError("world file: expected 6 numbers");
  std::string extra;
  if (in >> extra) throw ParseError("world file: trailing content");
  return t;
}

GreenRaster::GreenRaster(int width, int height, std::vector<std::uint8_t> rgb, WorldTransform transform)
    : width_(width), height_(height), rgb_(std::move(rgb)), transform_(transform) {
  if (width <= 0 || height <= 0) throw ValidationError("raster: empty");
  if (rgb_.size() != static_cast<std::size_t>(width) * height * 3) throw ValidationError("raster: pixel count mismatch");
  const double det = transform_.determinant();
  if (!std::isfinite(det) || det == 0.0) throw ValidationError("raster: geo transform not invertible");
}

std::pair<double, double> GreenRaster::to_pixel(const GeoPoint& p) const noexcept {
  const auto& t = transform_;
  const double x = p.lon() - t.c;
  const double y = p.lat() - t.f;
  const double det = t.determinant();
  return {(t.e * x - t.b * y) / det, (-t.d * x + t.a * y) / det};
}

GeoPoint GreenRaster::to_geo(double col, double row) const {
  const auto& t = transform_;
  return GeoPoint(t.d * col + t.e * row + t.f, t.a * col + t.b * row + t.c);
}

GreenRaster load_green_raster(const std::filesystem::path& png, const std::filesystem::path& world_file) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, png.c_str())) {
    throw ParseError("raster " + png.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ParseError("raster " + png.string() + ": " + image.message);
  }
  const auto transform = WorldTransform::parse(read_file_maybe_gzip(world_file));
  return GreenRaster(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels), transform);
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) noexcept {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double max = std::max({r, g, b});
  const double min = std::min({r, g, b});
  const double delta = max - min;
  Hsv out;
  out.v = max;
  out.s = max > 0.0 ? delta / max : 0.0;
  if (delta > 0.0) {
    double h = 0.0;
    if (max == r) {
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (max == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    out.h = h;
  }
  return out;
}

double green_index(const GreenRaster& raster, const GeoPoint& p, int window_px, const HsvThresholds& thresholds) {
  if (window_px <= 0) throw ValidationError("green_index: window must be positive");
  const auto [colf, rowf] = raster.to_pixel(p);
  const double col_r = std::round(colf);
  const double row_r = std::round(rowf);
  if (!(col_r >= 0.0 && col_r < raster.width() && row_r >= 0.0 && row_r < raster.height())) {
    throw ValidationError("coordinate not covered");
  }
  const int col = static_cast<int>(col_r);
  const int row = static_cast<int>(row_r);
  const int half = window_px / 2;
  const int c0 = std::max(0, col - half);
  const int r0 = std::max(0, row - half);
  const int c1 = std::min(raster.width(), col - half + window_px);
  const int r1 = std::min(raster.height(), row - half + window_px);
  long green = 0;
  long total = 0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const auto px = raster.pixel(c, r);
      const Hsv hsv = rgb_to_hsv(px[0], px[1], px[2]);
      ++total;
      if (hsv.h >= thresholds.hue_min_deg && hsv.h <= thresholds.hue_max_deg &&
          hsv.s >= thresholds.saturation_min && hsv.v >= thresholds.value_min) {
        ++green;
      }
    }
  }
  return static_cast<double>(green) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

ConstantWeatherProvider::ConstantWeatherProvider(WeatherInfo value) : value_(value) { value_.validate(); }
ConstantTrafficProvider::ConstantTrafficProvider(TrafficInfo value) : value_(value) { value_.validate(); }
ConstantGreennessProvider::ConstantGreennessProvider(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("greenness outside [0,1]");
}

std::pair<int, int> tile_of(const GeoPoint& p, int zoom) noexcept {
  const double n = std::ldexp(1.0, zoom);
  const double lat_rad = p.lat() * std::numbers::pi / 180.0;
  const double x = (p.lon() + 180.0) / 360.0 * n;
  const double y = (1.0 - std::asinh(std::tan(lat_rad)) / std::numbers::pi) / 2.0 * n;
  const int max_index = static_cast<int>(n) - 1;
  return {std::clamp(static_cast<int>(std::floor(x)), 0, max_index),
          std::clamp(static_cast<int>(std::floor(y)), 0, max_index)};
}

TileCsvProvider::TileCsvProvider(std::map<std::pair<int, int>, Row> rows, int zoom)
    : rows_(std::move(rows)), zoom_(zoom) {
  if (zoom < 0 || zoom > 24) throw ValidationError("tile zoom outside [0,24]");
  for (const auto& [key, row] : rows_) {
    row.weather.validate();
    row.traffic.validate();
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  for (auto& f : fields) {
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
    while (!f.empty() && f.back() == ' ') f.pop_back();
  }
  return fields;
}

template <typename T>
T csv_number(const std::string& text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("provider CSV line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

TileCsvProvider TileCsvProvider::parse(std::string_view csv, int zoom) {
  static const std::vector<std::string> kHeader = {"tile_x",         "tile_y",       "feeltemp_outside",
                                                   "windspeed",      "cloud_coverage", "weather_term",
                                                   "freeflow_speed", "reducedspeed"};
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::pair<int, int>, Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    const auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields != kHeader) throw ParseError("provider CSV: unexpected header");
      have_header = true;
      continue;
    }
    if (fields.size() != kHeader.size()) {
      throw ParseError("provider CSV line " + std::to_string(line_no) + ": expected 8 columns");
    }
    Row row;
    const std::pair<int, int> key{csv_number<int>(fields[0], line_no), csv_number<int>(fields[1], line_no)};
    row.weather.feeltemp_outside = csv_number<double>(fields[2], line_no);
    row.weather.windspeed = csv_number<double>(fields[3], line_no);
    row.weather.cloud_coverage = csv_number<double>(fields[4], line_no);
    row.weather.weather_term = parse_weather_term(fields[5]);
    row.traffic.freeflow_speed = csv_number<double>(fields[6], line_no);
    row.traffic.reducedspeed = csv_number<double>(fields[7], line_no);
    if (!rows.emplace(key, row).second) {
      throw ParseError("provider CSV line " + std::to_string(line_no) + ": duplicate tile");
    }
  }
  if (!have_header) throw ParseError("provider CSV: missing header");
  return TileCsvProvider(std::move(rows), zoom);
}

TileCsvProvider TileCsvProvider::load(const std::filesystem::path& path, int zoom) {
  return parse(read_file_maybe_gzip(path), zoom);
}

const TileCsvProvider::Row& TileCsvProvider::row_at(const GeoPoint& p) const {
  const auto it = rows_.find(tile_of(p, zoom_));
  if (it == rows_.end()) throw ValidationError("coordinate not covered");
  return it->second;
}

RasterGreennessProvider::RasterGreennessProvider(std::shared_ptr<const GreenRaster> raster, int window_px,
                                                 HsvThresholds thresholds)
    : raster_(std::move(raster)), window_px_(window_px), thresholds_(thresholds) {
  if (!raster_) throw ValidationError("raster provider needs a raster");
  if (window_px <= 0) throw ValidationError("window_px must be positive");
}

double RasterGreennessProvider::greenness_at(const GeoPoint& p) const {
  return green_index(*raster_, p, window_px_, thresholds_);
}

ProviderSet ProviderSet::constant(WeatherInfo weather, TrafficInfo traffic, double greenness) {
  return ProviderSet{std::make_shared<ConstantWeatherProvider>(weather),
                     std::make_shared<ConstantTrafficProvider>(traffic),
                     std::make_shared<ConstantGreennessProvider>(greenness), 0};
}

std::optional<ProviderSample> ContextCache::find(EdgeId edge, std::uint64_t epoch) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({edge, epoch});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ContextCache::insert(EdgeId edge, std::uint64_t epoch, const ProviderSample& sample) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign({edge, epoch}, sample);
}

std::size_t ContextCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void ContextCache::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

namespace {

template <typename Provider, typename Fn>
auto call_provider(const std::shared_ptr<const Provider>& provider, const char* role, Fn&& fn) {
  if (!provider) throw ProviderError(role, "not configured");
  try {
    return fn(*provider);
  } catch (const ProviderError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError(provider->name(), e.what());
  }
}

}  // namespace

ProviderSample sample_providers(const RoadEdge& edge, const ProviderSet& providers) {
  const GeoPoint mid = polyline_midpoint(edge.geometry);
  ProviderSample sample;
  sample.weather = call_provider(providers.weather, "weather", [&](const WeatherProvider& p) {
    auto w = p.weather_at(mid);
    w.validate();
    return w;
  });
  sample.traffic = call_provider(providers.traffic, "traffic", [&](const TrafficProvider& p) {
    auto t = p.traffic_at(mid);
    t.validate();
    return t;
  });
  sample.satellite_greeness = call_provider(providers.greenness, "greenness", [&](const GreennessProvider& p) {
    const double g = p.greenness_at(mid);
    if (!(g >= 0.0 && g <= 1.0)) throw ValidationError("greenness outside [0,1]");
    return g;
  });
  return sample;
}

ContextSnapshot context_for_edge(const RoadEdge& edge, const ProviderSet& providers, const LocalTimestamp& at,
                                 const PersonalProfile& profile, ContextCache* cache) {
  profile.validate();
  std::optional<ProviderSample> sample;
  if (cache != nullptr) sample = cache->find(edge.id, providers.epoch);
  if (!sample) {
    sample = sample_providers(edge, providers);
    if (cache != nullptr) cache->insert(edge.id, providers.epoch, *sample);
  }
  ContextSnapshot snapshot;
  snapshot.weather = sample->weather;
  snapshot.traffic = sample->traffic;
  snapshot.road_type = edge.road_type;
  snapshot.max_speed = edge.max_speed_kmh;
  snapshot.n_lanes = edge.n_lanes;
  snapshot.satellite_greeness = sample->satellite_greeness;
  snapshot.daytime = daytime_bucket(at.hour);
  snapshot.personal = profile;
  return snapshot;
}

}  // namespace affect_router
