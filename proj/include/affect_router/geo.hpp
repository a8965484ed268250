#pragma once

#include <cstdint>
#include <span>

namespace affect_router {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// WGS84 coordinate in degrees. Construction validates finiteness and range.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine(const GeoPoint& p1, const GeoPoint& p2) noexcept;

/// Initial bearing from p1 to p2 in degrees, [0, 360).
double bearing_deg(const GeoPoint& p1, const GeoPoint& p2) noexcept;

/// Sum of haversine distances along a polyline.
double polyline_length(std::span<const GeoPoint> line) noexcept;

/// Point at half the polyline's length.
GeoPoint polyline_midpoint(std::span<const GeoPoint> line);

struct BoundingBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  bool intersects(const BoundingBox& other) const noexcept {
    return !(other.min_lat > max_lat || other.max_lat < min_lat || other.min_lon > max_lon ||
             other.max_lon < min_lon);
  }
};

BoundingBox bounding_box(std::span<const GeoPoint> points);

}  // namespace affect_router
