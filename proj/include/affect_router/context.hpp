#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "affect_router/geo.hpp"
#include "affect_router/road_graph.hpp"

namespace affect_router {

// ---------------------------------------------------------------------------
// Categorical features. Enumerator order is the one-hot order.

enum class WeatherTerm : std::uint8_t { clear, clouds, rain, snow, fog };
inline constexpr std::size_t kWeatherTermCount = 5;

enum class Daytime : std::uint8_t { morning, afternoon, evening, night };
inline constexpr std::size_t kDaytimeCount = 4;

enum class Emotion : std::uint8_t { happy, sad, neutral, angry, contempt, disgust, fear, surprise };
inline constexpr std::size_t kEmotionCount = 8;

std::string_view to_string(WeatherTerm term) noexcept;
std::string_view to_string(Daytime daytime) noexcept;
std::string_view to_string(Emotion emotion) noexcept;
WeatherTerm parse_weather_term(std::string_view name);
Daytime parse_daytime(std::string_view name);
/// Accepts the class labels plus "happiness" as an alias of happy.
Emotion parse_emotion(std::string_view name);

// ---------------------------------------------------------------------------

struct WeatherInfo {
  double feeltemp_outside = 15.0;  // degC
  double windspeed = 0.0;          // km/h
  double cloud_coverage = 0.0;     // percent
  WeatherTerm weather_term = WeatherTerm::clear;

  void validate() const;
  friend bool operator==(const WeatherInfo&, const WeatherInfo&) = default;
};

struct TrafficInfo {
  double freeflow_speed = 50.0;  // km/h
  double reducedspeed = 0.0;     // km/h

  void validate() const;
  friend bool operator==(const TrafficInfo&, const TrafficInfo&) = default;
};

struct PersonalProfile {
  int age = 30;
  Emotion before_emotion = Emotion::neutral;

  void validate() const;
  friend bool operator==(const PersonalProfile&, const PersonalProfile&) = default;
};

/// Feature bundle for one edge; exactly the model's input features.
struct ContextSnapshot {
  WeatherInfo weather;
  TrafficInfo traffic;
  RoadType road_type = RoadType::unclassified;
  std::optional<double> max_speed;
  std::optional<int> n_lanes;
  double satellite_greeness = 0.0;
  Daytime daytime = Daytime::afternoon;
  PersonalProfile personal;

  void validate() const;
  friend bool operator==(const ContextSnapshot&, const ContextSnapshot&) = default;
};

nlohmann::json to_json(const ContextSnapshot& snapshot);
ContextSnapshot snapshot_from_json(const nlohmann::json& j);

/// Wall-clock time in the map's local zone, second resolution.
struct LocalTimestamp {
  int year = 2023;
  int month = 1;
  int day = 1;
  int hour = 12;
  int minute = 0;
  int second = 0;

  /// Accepts "YYYY-MM-DDTHH:MM:SS" (a trailing "Z" is ignored).
  static LocalTimestamp parse(std::string_view iso);
  std::string iso8601() const;
  friend bool operator==(const LocalTimestamp&, const LocalTimestamp&) = default;
};

/// morning [5,12), afternoon [12,18), evening [18,22), night otherwise.
Daytime daytime_bucket(int local_hour);

// ---------------------------------------------------------------------------
// Green raster

/// World-file affine transform: lon = a*col + b*row + c, lat = d*col + e*row + f,
/// where (col,row) addresses pixel centers. File order is a, d, b, e, c, f.
struct WorldTransform {
  double a = 1.0;
  double d = 0.0;
  double b = 0.0;
  double e = -1.0;
  double c = 0.0;
  double f = 0.0;

  static WorldTransform parse(std::string_view text);
  double determinant() const noexcept { return a * e - b * d; }
};

class GreenRaster {
 public:
  GreenRaster(int width, int height, std::vector<std::uint8_t> rgb, WorldTransform transform);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const WorldTransform& transform() const noexcept { return transform_; }
  std::array<std::uint8_t, 3> pixel(int col, int row) const noexcept {
    const std::size_t i = (static_cast<std::size_t>(row) * width_ + col) * 3;
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
  }
  /// Fractional (col,row) of a coordinate.
  std::pair<double, double> to_pixel(const GeoPoint& p) const noexcept;
  GeoPoint to_geo(double col, double row) const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
  WorldTransform transform_;
};

/// PNG (RGB or RGBA, 8 bit) plus world file.
GreenRaster load_green_raster(const std::filesystem::path& png, const std::filesystem::path& world_file);

struct HsvThresholds {
  double hue_min_deg = 65.0;
  double hue_max_deg = 170.0;
  double saturation_min = 0.15;
  double value_min = 0.10;
};

struct Hsv {
  double h = 0.0;  // degrees [0,360)
  double s = 0.0;
  double v = 0.0;
};
Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

/// Fraction of vegetation-hued pixels in a window_px x window_px window
/// centered on p, clipped at the raster border.
double green_index(const GreenRaster& raster, const GeoPoint& p, int window_px,
                   const HsvThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Providers

class WeatherProvider {
 public:
  virtual ~WeatherProvider() = default;
  virtual std::string name() const = 0;
  virtual WeatherInfo weather_at(const GeoPoint& p) const = 0;
};

class TrafficProvider {
 public:
  virtual ~TrafficProvider() = default;
  virtual std::string name() const = 0;
  virtual TrafficInfo traffic_at(const GeoPoint& p) const = 0;
};

class GreennessProvider {
 public:
  virtual ~GreennessProvider() = default;
  virtual std::string name() const = 0;
  virtual double greenness_at(const GeoPoint& p) const = 0;
};

class ConstantWeatherProvider final : public WeatherProvider {
 public:
  explicit ConstantWeatherProvider(WeatherInfo value);
  std::string name() const override { return "constant-weather"; }
  WeatherInfo weather_at(const GeoPoint&) const override { return value_; }

 private:
  WeatherInfo value_;
};

class ConstantTrafficProvider final : public TrafficProvider {
 public:
  explicit ConstantTrafficProvider(TrafficInfo value);
  std::string name() const override { return "constant-traffic"; }
  TrafficInfo traffic_at(const GeoPoint&) const override { return value_; }

 private:
  TrafficInfo value_;
};

class ConstantGreennessProvider final : public GreennessProvider {
 public:
  explicit ConstantGreennessProvider(double value);
  std::string name() const override { return "constant-greenness"; }
  double greenness_at(const GeoPoint&) const override { return value_; }

 private:
  double value_;
};

/// Slippy-map tile (x, y) at the given zoom.
std::pair<int, int> tile_of(const GeoPoint& p, int zoom) noexcept;

/// Weather and traffic keyed by slippy-map tile, read from CSV with columns
/// tile_x,tile_y,feeltemp_outside,windspeed,cloud_coverage,weather_term,freeflow_speed,reducedspeed.
class TileCsvProvider final : public WeatherProvider, public TrafficProvider {
 public:
  struct Row {
    WeatherInfo weather;
    TrafficInfo traffic;
  };

  TileCsvProvider(std::map<std::pair<int, int>, Row> rows, int zoom);
  static TileCsvProvider parse(std::string_view csv, int zoom);
  static TileCsvProvider load(const std::filesystem::path& path, int zoom);

  std::string name() const override { return "tile-csv"; }
  WeatherInfo weather_at(const GeoPoint& p) const override { return row_at(p).weather; }
  TrafficInfo traffic_at(const GeoPoint& p) const override { return row_at(p).traffic; }
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  const Row& row_at(const GeoPoint& p) const;

  std::map<std::pair<int, int>, Row> rows_;
  int zoom_;
};

class RasterGreennessProvider final : public GreennessProvider {
 public:
  RasterGreennessProvider(std::shared_ptr<const GreenRaster> raster, int window_px,
                          HsvThresholds thresholds = {});
  std::string name() const override { return "green-raster"; }
  double greenness_at(const GeoPoint& p) const override;

 private:
  std::shared_ptr<const GreenRaster> raster_;
  int window_px_;
  HsvThresholds thresholds_;
};

struct ProviderSet {
  std::shared_ptr<const WeatherProvider> weather;
  std::shared_ptr<const TrafficProvider> traffic;
  std::shared_ptr<const GreennessProvider> greenness;
  /// Bumped on explicit rebuild; cached samples from older epochs are ignored.
  std::uint64_t epoch = 0;

  static ProviderSet constant(WeatherInfo weather, TrafficInfo traffic, double greenness);
};

/// Provider answers for one edge midpoint.
struct ProviderSample {
  WeatherInfo weather;
  TrafficInfo traffic;
  double satellite_greeness = 0.0;

  friend bool operator==(const ProviderSample&, const ProviderSample&) = default;
};

/// Thread-safe cache of provider samples keyed by (edge id, provider epoch).
class ContextCache {
 public:
  std::optional<ProviderSample> find(EdgeId edge, std::uint64_t epoch) const;
  void insert(EdgeId edge, std::uint64_t epoch, const ProviderSample& sample);
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<EdgeId, std::uint64_t>, ProviderSample> entries_;
};

/// Queries every provider at the edge midpoint. Throws ProviderError naming
/// the failing provider; nothing is cached on failure.
ProviderSample sample_providers(const RoadEdge& edge, const ProviderSet& providers);

ContextSnapshot context_for_edge(const RoadEdge& edge, const ProviderSet& providers,
                                 const LocalTimestamp& at, const PersonalProfile& profile,
                                 ContextCache* cache = nullptr);

}  // namespace affect_router
