#include "canalplan/graph/geo.hpp"

#include <cmath>
#include <numbers>

namespace canalplan::graph {

bool valid_coordinates(const GeoNode& node) {
  return std::isfinite(node.lat) && std::isfinite(node.lon) && node.lat >= -90.0 &&
         node.lat <= 90.0 && node.lon >= -180.0 && node.lon <= 180.0;
}

double planar_distance(const GeoNode& a, const GeoNode& b) {
  const double mid_lat = 0.5 * (a.lat + b.lat) * std::numbers::pi / 180.0;
  const double dx = (b.lon - a.lon) * std::cos(mid_lat) * kMetersPerDegreeLon;
  const double dy = (b.lat - a.lat) * kMetersPerDegreeLat;
  return std::hypot(dx, dy);
}

}  // namespace canalplan::graph
