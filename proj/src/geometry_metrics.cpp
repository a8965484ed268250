#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "affect_router/analysis.hpp"
#include "affect_router/error.hpp"

namespace affect_router {

namespace {

constexpr double kDegenerateTolerance = 1e-12;

double circumradius_impl(double a, double b, double c, bool strict) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || a < 0.0 || b < 0.0 || c < 0.0) {
    throw ValidationError("circumradius: side lengths must be finite and >= 0");
  }
  // Tolerance scales with the triangle so that r(ka,kb,kc) = k r(a,b,c).
  const double tol = kDegenerateTolerance * std::max({1.0, a, b, c});
  const double f1 = b + c - a;
  const double f2 = c + a - b;
  const double f3 = a + b - c;
  if (strict && (f1 < -tol || f2 < -tol || f3 < -tol)) {
    throw ValidationError("circumradius: triangle inequality violated");
  }
  if (f1 <= tol || f2 <= tol || f3 <= tol) return std::numeric_limits<double>::infinity();
  return a * b * c / std::sqrt((a + b + c) * f1 * f2 * f3);
}

}  // namespace

double circumradius(double a, double b, double c) { return circumradius_impl(a, b, c, true); }

double route_curviness(std::span<const GeoPoint> polyline) {
  if (polyline.size() < 3) return 0.0;
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < polyline.size(); ++i) {
    const double a = haversine(polyline[i - 1], polyline[i]);
    const double b = haversine(polyline[i], polyline[i + 1]);
    const double c = haversine(polyline[i - 1], polyline[i + 1]);
    const double half = (a + b) / 2.0;
    // Haversine is a metric, so any violation here is rounding noise.
    const double r = circumradius_impl(a, b, c, false);
    const double curvature = std::isinf(r) ? 0.0 : 1.0 / r;
    weighted += half * curvature;
    total += half;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

double route_overlap(const Route& r1, const Route& r2) {
  if (r1.per_edge.empty() || r2.per_edge.empty()) return 0.0;
  // Sums run in edge-id order so the result is exactly symmetric.
  auto by_id = [](const Route& r) {
    std::vector<std::pair<EdgeId, double>> v;
    v.reserve(r.per_edge.size());
    for (const auto& e : r.per_edge) v.emplace_back(e.edge_id, e.length_m);
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = by_id(r1);
  const auto b = by_id(r2);
  double len_a = 0.0;
  double len_b = 0.0;
  for (const auto& x : a) len_a += x.second;
  for (const auto& x : b) len_b += x.second;
  double shared = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      shared += a[i].second;
      ++i;
      ++j;
    }
  }
  const double denom = std::max(len_a, len_b);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(shared / denom * 100.0, 0.0, 100.0);
}

std::map<RoadType, double> roadtype_shares(const Route& route) {
  if (route.per_edge.empty()) throw ValidationError("roadtype_shares: empty route");
  std::map<RoadType, double> time_by_type;
  double total = 0.0;
  for (const auto& e : route.per_edge) {
    time_by_type[e.road_type] += e.base_time_s;
    total += e.base_time_s;
  }
  if (!(total > 0.0)) throw ValidationError("roadtype_shares: zero-duration route");
  for (auto& [type, t] : time_by_type) t /= total;
  return time_by_type;
}

}  // namespace affect_router
