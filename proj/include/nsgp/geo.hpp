#pragma once

#include <cmath>
#include <numbers>

namespace nsgp {

/// Mean Earth radius in megameters (thousands of km). Every range parameter in
/// the library is expressed in this unit.
inline constexpr double kEarthRadiusMm = 6.371;
inline constexpr double kEarthDiameterMm = 2.0 * kEarthRadiusMm;

struct GeoPoint {
  double longitude = 0.0;  // degrees
  double latitude = 0.0;   // degrees
};

struct XyzPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const XyzPoint&, const XyzPoint&) = default;
};

inline double deg2rad(double deg) { return deg * (std::numbers::pi / 180.0); }

/// Embeds a lon/lat point on a sphere of the given radius (Mm).
inline XyzPoint to_xyz(const GeoPoint& p, double radius = kEarthRadiusMm) {
  const double lat = deg2rad(p.latitude);
  const double lon = deg2rad(p.longitude);
  return {radius * std::cos(lat) * std::cos(lon), radius * std::cos(lat) * std::sin(lon),
          radius * std::sin(lat)};
}

inline double squared_distance(const XyzPoint& a, const XyzPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Chordal (straight-line) distance in R^3.
inline double euclid(const XyzPoint& a, const XyzPoint& b) {
  return std::sqrt(squared_distance(a, b));
}

inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

/// Rounds every coordinate to `decimals` places so that neighbor structures do
/// not depend on the last bits of the trigonometric functions.
inline XyzPoint round_xyz(const XyzPoint& p, int decimals = 4) {
  return {round_to(p.x, decimals), round_to(p.y, decimals), round_to(p.z, decimals)};
}

}  // namespace nsgp
