#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "affect_router/context.hpp"
#include "affect_router/geo.hpp"

namespace affect_router {

/// Grid-shaped test city. Every eighth line is primary, every fourth
/// secondary, every second tertiary, the rest residential; the middle row and
/// column are trunk roads. Junction coordinates are jittered so that no two
/// routes tie exactly, a few segments are dropped, some get a bent shape
/// point, and every third residential row is one-way.
struct CityOptions {
  int rows = 12;
  int cols = 12;
  double spacing_m = 250.0;
  double south = 48.3700;
  double west = 10.8800;
  double jitter_fraction = 0.08;
  double drop_fraction = 0.03;
  double bend_fraction = 0.25;
  std::uint64_t seed = 7;

  void validate() const;
};

/// OSM XML for the city; parse_osm_xml + build_graph accept it unchanged.
std::string make_city_osm(const CityOptions& options);

/// RGB raster over the city extent (plus one spacing of margin) with a few
/// green parks on grey ground, and its world file text.
struct CityRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  WorldTransform transform;
};

CityRaster make_city_raster(const CityOptions& options, double metres_per_pixel = 10.0);
std::string world_file_text(const WorldTransform& t);
void save_png_rgb(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

/// Weather/traffic CSV for TileCsvProvider covering every tile of the city at the zoom.
std::string make_city_tiles_csv(const CityOptions& options, int zoom);

}  // namespace affect_router
