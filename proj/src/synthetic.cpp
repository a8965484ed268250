#include "affect_router/synthetic.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <vector>

#include "affect_router/error.hpp"

namespace affect_router {

namespace {

constexpr double kMetresPerDegreeLat = 111320.0;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // Uniform in [0,1) from the top 53 bits; identical on every platform.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double between(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

struct Frame {
  double south;
  double west;
  double m_per_deg_lon;

  double lat(double north_m) const { return south + north_m / kMetresPerDegreeLat; }
  double lon(double east_m) const { return west + east_m / m_per_deg_lon; }
};

Frame frame_of(const CityOptions& o) {
  return {o.south, o.west, kMetresPerDegreeLat * std::cos(o.south * std::numbers::pi / 180.0)};
}

std::string line_type(int index, int count) {
  if (index == count / 2) return "trunk";
  if (index % 8 == 0) return "primary";
  if (index % 4 == 0) return "secondary";
  if (index % 2 == 0) return "tertiary";
  return "residential";
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void CityOptions::validate() const {
  if (rows < 2 || cols < 2) throw ValidationError("city needs at least 2 rows and 2 columns");
  if (!(spacing_m > 0.0)) throw ValidationError("city spacing must be positive");
  if (!(jitter_fraction >= 0.0 && jitter_fraction < 0.25)) throw ValidationError("jitter_fraction must be in [0, 0.25)");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw ValidationError("drop_fraction must be in [0, 1)");
  if (!(bend_fraction >= 0.0 && bend_fraction <= 1.0)) throw ValidationError("bend_fraction must be in [0, 1]");
  GeoPoint(south, west);
}

std::string make_city_osm(const CityOptions& o) {
  o.validate();
  Rng rng(o.seed);
  const Frame frame = frame_of(o);

  struct Pt {
    double north;
    double east;
  };
  std::vector<Pt> junction(static_cast<std::size_t>(o.rows) * o.cols);
  for (int i = 0; i < o.rows; ++i) {
    for (int j = 0; j < o.cols; ++j) {
      const double jn = rng.between(-o.jitter_fraction, o.jitter_fraction) * o.spacing_m;
      const double je = rng.between(-o.jitter_fraction, o.jitter_fraction) * o.spacing_m;
      junction[static_cast<std::size_t>(i) * o.cols + j] = {i * o.spacing_m + jn, j * o.spacing_m + je};
    }
  }
  auto junction_id = [&](int i, int j) { return static_cast<long long>(i) * o.cols + j + 1; };

  std::string nodes;
  std::string ways;
  long long next_shape_id = static_cast<long long>(o.rows) * o.cols + 1;
  long long next_way_id = 1;
  auto emit_node = [&](long long id, const Pt& p) {
    nodes += "  <node id=\"" + std::to_string(id) + "\" lat=\"" + fmt("%.7f", frame.lat(p.north)) + "\" lon=\"" +
             fmt("%.7f", frame.lon(p.east)) + "\"/>\n";
  };
  for (int i = 0; i < o.rows; ++i) {
    for (int j = 0; j < o.cols; ++j) emit_node(junction_id(i, j), junction[static_cast<std::size_t>(i) * o.cols + j]);
  }

  auto emit_way = [&](const std::vector<long long>& refs, const std::string& type, const std::string& oneway) {
    if (refs.size() < 2) return;
    ways += "  <way id=\"" + std::to_string(next_way_id++) + "\">\n";
    for (long long r : refs) ways += "    <nd ref=\"" + std::to_string(r) + "\"/>\n";
    ways += "    <tag k=\"highway\" v=\"" + type + "\"/>\n";
    if (type == "trunk") {
      ways += "    <tag k=\"maxspeed\" v=\"80\"/>\n    <tag k=\"lanes\" v=\"3\"/>\n";
    } else if (type == "primary") {
      ways += "    <tag k=\"maxspeed\" v=\"60\"/>\n    <tag k=\"lanes\" v=\"2\"/>\n";
    } else if (type == "residential") {
      ways += "    <tag k=\"maxspeed\" v=\"30\"/>\n";
    }
    if (!oneway.empty()) ways += "    <tag k=\"oneway\" v=\"" + oneway + "\"/>\n";
    ways += "  </way>\n";
  };

  // Lines run west-east (rows) then south-north (columns).
  for (int pass = 0; pass < 2; ++pass) {
    const int lines = pass == 0 ? o.rows : o.cols;
    const int length = pass == 0 ? o.cols : o.rows;
    for (int line = 0; line < lines; ++line) {
      const std::string type = line_type(line, lines);
      std::string oneway;
      if (pass == 0 && type == "residential" && line % 3 == 1) oneway = (line / 3) % 2 == 0 ? "yes" : "-1";
      const bool minor = type == "residential" || type == "tertiary";
      std::vector<long long> refs;
      for (int k = 0; k < length; ++k) {
        const int i = pass == 0 ? line : k;
        const int j = pass == 0 ? k : line;
        refs.push_back(junction_id(i, j));
        if (k + 1 == length) break;
        const bool dropped = minor && rng.unit() < o.drop_fraction;
        const bool bent = minor && rng.unit() < o.bend_fraction;
        const double offset = rng.between(0.08, 0.18) * o.spacing_m * (rng.unit() < 0.5 ? -1.0 : 1.0);
        if (dropped) {
          emit_way(refs, type, oneway);
          refs.clear();
          continue;
        }
        if (bent) {
          const int ni = pass == 0 ? i : i + 1;
          const int nj = pass == 0 ? j + 1 : j;
          const Pt& a = junction[static_cast<std::size_t>(i) * o.cols + j];
          const Pt& b = junction[static_cast<std::size_t>(ni) * o.cols + nj];
          Pt mid{(a.north + b.north) / 2.0, (a.east + b.east) / 2.0};
          if (pass == 0) {
            mid.north += offset;
          } else {
            mid.east += offset;
          }
          emit_node(next_shape_id, mid);
          refs.push_back(next_shape_id++);
        }
      }
      emit_way(refs, type, oneway);
    }
  }
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"affect-router synth-city\">\n" +
         nodes + ways + "</osm>\n";
}

CityRaster make_city_raster(const CityOptions& o, double metres_per_pixel) {
  o.validate();
  if (!(metres_per_pixel > 0.0)) throw ValidationError("metres_per_pixel must be positive");
  const Frame frame = frame_of(o);
  const double margin = o.spacing_m;
  const double extent_n = (o.rows - 1) * o.spacing_m + 2.0 * margin;
  const double extent_e = (o.cols - 1) * o.spacing_m + 2.0 * margin;
  CityRaster r;
  r.width = static_cast<int>(std::ceil(extent_e / metres_per_pixel));
  r.height = static_cast<int>(std::ceil(extent_n / metres_per_pixel));
  r.rgb.assign(static_cast<std::size_t>(r.width) * r.height * 3, 0);

  Rng rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
  struct Park {
    double north;
    double east;
    double radius;
  };
  std::vector<Park> parks;
  const int park_count = std::max(2, o.rows * o.cols / 30);
  for (int k = 0; k < park_count; ++k) {
    parks.push_back({rng.between(0.0, extent_n), rng.between(0.0, extent_e), rng.between(0.6, 1.6) * o.spacing_m});
  }
  for (int row = 0; row < r.height; ++row) {
    for (int col = 0; col < r.width; ++col) {
      const double north = extent_n - (row + 0.5) * metres_per_pixel;
      const double east = (col + 0.5) * metres_per_pixel;
      bool green = false;
      for (const Park& p : parks) {
        if (std::hypot(north - p.north, east - p.east) <= p.radius) {
          green = true;
          break;
        }
      }
      const std::size_t i = (static_cast<std::size_t>(row) * r.width + col) * 3;
      if (green) {
        r.rgb[i] = 58;
        r.rgb[i + 1] = 138;
        r.rgb[i + 2] = 64;
      } else {
        r.rgb[i] = r.rgb[i + 1] = r.rgb[i + 2] = 128;
      }
    }
  }
  const double deg_lon_px = metres_per_pixel / frame.m_per_deg_lon;
  const double deg_lat_px = metres_per_pixel / kMetresPerDegreeLat;
  r.transform.a = deg_lon_px;
  r.transform.d = 0.0;
  r.transform.b = 0.0;
  r.transform.e = -deg_lat_px;
  r.transform.c = frame.lon(-margin) + deg_lon_px / 2.0;
  r.transform.f = frame.lat(extent_n - margin) - deg_lat_px / 2.0;
  return r;
}

std::string world_file_text(const WorldTransform& t) {
  std::string out;
  for (double v : {t.a, t.d, t.b, t.e, t.c, t.f}) out += fmt("%.12g", v) + "\n";
  return out;
}

void save_png_rgb(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw ValidationError("png buffer size mismatch");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw UsageError("cannot write " + path.string() + ": " + message);
  }
}

std::string make_city_tiles_csv(const CityOptions& o, int zoom) {
  o.validate();
  const Frame frame = frame_of(o);
  const double margin = o.spacing_m;
  const GeoPoint nw(frame.lat((o.rows - 1) * o.spacing_m + margin), frame.lon(-margin));
  const GeoPoint se(frame.lat(-margin), frame.lon((o.cols - 1) * o.spacing_m + margin));
  const auto [x0, y0] = tile_of(nw, zoom);
  const auto [x1, y1] = tile_of(se, zoom);
  static constexpr const char* kTerms[] = {"clear", "clear", "clouds", "clouds", "rain", "fog"};
  Rng rng(o.seed ^ 0x5851f42d4c957f2dULL);
  std::string out =
      "tile_x,tile_y,feeltemp_outside,windspeed,cloud_coverage,weather_term,freeflow_speed,reducedspeed\n";
  for (int x = x0; x <= x1; ++x) {
    for (int y = y0; y <= y1; ++y) {
      const double temp = std::round(rng.between(8.0, 24.0) * 10.0) / 10.0;
      const double wind = std::round(rng.between(0.0, 25.0) * 10.0) / 10.0;
      const double cloud = std::round(rng.between(0.0, 100.0));
      const char* term = kTerms[static_cast<int>(rng.unit() * 6.0)];
      const double freeflow = std::round(rng.between(30.0, 70.0));
      const double reduced = std::round(rng.between(0.0, 15.0));
      out += std::to_string(x) + "," + std::to_string(y) + "," + fmt("%g", temp) + "," + fmt("%g", wind) + "," +
             fmt("%g", cloud) + "," + term + "," + fmt("%g", freeflow) + "," + fmt("%g", reduced) + "\n";
    }
  }
  return out;
}

}  // namespace affect_router
