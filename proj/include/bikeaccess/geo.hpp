#pragma once

#include <span>

namespace bikeaccess {

inline constexpr double kEarthRadiusM = 6371000.0;

// WGS84 degrees. Construct through make_point() when the values come from input.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Throws DomainError outside [-180,180] x [-90,90] or on non-finite values.
GeoPoint make_point(double lon, double lat);
bool is_valid(const GeoPoint& p);

// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

// Ray casting over a closed ring (first == last). Points on an edge count as inside.
bool ring_contains(std::span<const GeoPoint> ring, const GeoPoint& p);

}  // namespace bikeaccess
