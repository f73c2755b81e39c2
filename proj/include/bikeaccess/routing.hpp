#pragma once

#include <limits>
#include <string>
#include <vector>

#include "bikeaccess/geodata.hpp"

namespace bikeaccess {

enum class TravelMode { bike, walk };

inline constexpr double kBikeSpeedMPerMin = 280.0;
inline constexpr double kWalkSpeedMPerMin = 80.0;
inline constexpr double kSnapThresholdM = 300.0;

bool allows(TravelMode mode, RoadClass cls);
double speed_m_per_min(TravelMode mode);

struct PathResult {
  double distance_m = 0.0;
  std::vector<NodeId> nodes;
};

// Nearest node incident to an allowed edge; ties go to the smaller id.
// Throws SnapError if that node is farther than kSnapThresholdM.
NodeId snap(const GeoPoint& p, const RoadNetwork& net, TravelMode mode);

// Dijkstra. Among equal-length paths the lexicographically smallest node
// sequence wins. Throws UnreachableError when dst cannot be reached.
PathResult shortest_path_m(const RoadNetwork& net, NodeId src, NodeId dst, TravelMode mode);

// Single-source distances over allowed edges; +inf for unreachable nodes.
// Settling stops once the frontier exceeds `cutoff_m`.
std::vector<double> shortest_distances_m(const RoadNetwork& net, NodeId src, TravelMode mode,
                                         double cutoff_m = std::numeric_limits<double>::infinity());

// distance_m / 280. Throws InvalidArgument for negative input.
double bike_time_min(double distance_m);

struct EntranceTime {
  const SubwayEntrance* entrance = nullptr;
  double t_bike_min = 0.0;
  double network_m = 0.0;
};

struct ReachableEntrances {
  std::vector<EntranceTime> entrances;  // entrance_id order
  std::vector<std::string> warnings;
};

// Entrances within 500 m straight-line of `location`, with bike travel time
// over the network. Snap or routing failures drop the entrance with a warning.
ReachableEntrances reachable_entrances(const GeoPoint& location, const CitySnapshot& snap,
                                       double radius_m = 500.0);

}  // namespace bikeaccess
