#pragma once

#include <string>

namespace canalplan::graph {

struct GeoNode {
  std::string id;
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

// Metres per degree used by the equirectangular projection.
inline constexpr double kMetersPerDegreeLon = 111320.0;  // scaled by cos(lat)
inline constexpr double kMetersPerDegreeLat = 110540.0;

bool valid_coordinates(const GeoNode& node);

// Equirectangular distance in metres. Symmetric, zero iff the coordinates
// coincide. Accurate to well under 1% over the few-kilometre spans a canal
// district covers.
double planar_distance(const GeoNode& a, const GeoNode& b);

}  // namespace canalplan::graph
