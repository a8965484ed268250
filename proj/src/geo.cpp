#include "affect_router/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "affect_router/error.hpp"

namespace affect_router {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon)) {
    throw ValidationError("coordinate must be finite");
  }
  if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
    throw ValidationError("coordinate out of range: " + std::to_string(lat) + "," +
                          std::to_string(lon));
  }
}

double haversine(const GeoPoint& p1, const GeoPoint& p2) noexcept {
  const double phi1 = p1.lat() * kDegToRad;
  const double phi2 = p2.lat() * kDegToRad;
  const double dphi = (p2.lat() - p1.lat()) * kDegToRad;
  const double dlambda = (p2.lon() - p1.lon()) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  // The two cos factors multiply in a fixed order so the result is symmetric.
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPoint& p1, const GeoPoint& p2) noexcept {
  const double phi1 = p1.lat() * kDegToRad;
  const double phi2 = p2.lat() * kDegToRad;
  const double dlambda = (p2.lon() - p1.lon()) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::atan2(y, x) / kDegToRad;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double polyline_length(std::span<const GeoPoint> line) noexcept {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += haversine(line[i - 1], line[i]);
  return total;
}

GeoPoint polyline_midpoint(std::span<const GeoPoint> line) {
  if (line.empty()) throw ValidationError("midpoint of empty polyline");
  if (line.size() == 1) return line.front();
  const double half = polyline_length(line) / 2.0;
  double walked = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = haversine(line[i - 1], line[i]);
    if (walked + seg >= half && seg > 0.0) {
      // Linear interpolation in lat/lon is adequate at road-segment scale.
      const double t = (half - walked) / seg;
      return GeoPoint(line[i - 1].lat() + t * (line[i].lat() - line[i - 1].lat()),
                      line[i - 1].lon() + t * (line[i].lon() - line[i - 1].lon()));
    }
    walked += seg;
  }
  return line.back();
}

BoundingBox bounding_box(std::span<const GeoPoint> points) {
  if (points.empty()) return {};
  BoundingBox box{points[0].lat(), points[0].lon(), points[0].lat(), points[0].lon()};
  for (const auto& p : points) {
    box.min_lat = std::min(box.min_lat, p.lat());
    box.max_lat = std::max(box.max_lat, p.lat());
    box.min_lon = std::min(box.min_lon, p.lon());
    box.max_lon = std::max(box.max_lon, p.lon());
  }
  return box;
}

}  // namespace affect_router
