#include "bikeaccess/routing.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"

namespace bikeaccess {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using QueueItem = std::pair<double, NodeId>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

// Distances from `src`; stops after settling `stop_at` (if given) or when the
// frontier passes `cutoff`.
std::vector<double> dijkstra(const RoadNetwork& net, NodeId src, TravelMode mode, double cutoff,
                             std::optional<NodeId> stop_at) {
  std::vector<double> dist(net.node_count(), kInf);
  std::vector<char> settled(net.node_count(), 0);
  MinQueue queue;
  dist[src] = 0.0;
  queue.emplace(0.0, src);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (settled[u]) continue;
    if (d > cutoff) break;
    settled[u] = 1;
    if (stop_at && u == *stop_at) break;
    for (const auto& arc : net.arcs(u)) {
      const RoadEdge& e = net.edges()[arc.edge];
      if (!allows(mode, e.road_class)) continue;
      const double nd = d + e.length_m;
      if (nd < dist[arc.to]) {
        dist[arc.to] = nd;
        queue.emplace(nd, arc.to);
      }
    }
  }
  // Tentative labels beyond the stopping point are not final.
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (!settled[i]) dist[i] = kInf;
  }
  return dist;
}

void check_node(const RoadNetwork& net, NodeId id) {
  if (id >= net.node_count()) throw InvalidArgument(fmt::format("node {} does not exist", id));
}

}  // namespace

bool allows(TravelMode mode, RoadClass cls) {
  if (mode == TravelMode::bike) return true;
  return cls != RoadClass::motorway && cls != RoadClass::trunk;
}

double speed_m_per_min(TravelMode mode) {
  return mode == TravelMode::bike ? kBikeSpeedMPerMin : kWalkSpeedMPerMin;
}

NodeId snap(const GeoPoint& p, const RoadNetwork& net, TravelMode mode) {
  std::vector<char> usable(net.node_count(), 0);
  for (const RoadEdge& e : net.edges()) {
    if (allows(mode, e.road_class)) usable[e.u] = usable[e.v] = 1;
  }
  std::optional<NodeId> best;
  double best_d = kInf;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (!usable[n]) continue;
    const double d = haversine_m(p, net.node(n));
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  if (!best) throw SnapError("network has no edges usable by this travel mode");
  if (best_d > kSnapThresholdM) {
    throw SnapError(fmt::format("point ({}, {}) is {:.1f} m from the network (limit {} m)", p.lon, p.lat, best_d,
                                kSnapThresholdM));
  }
  return *best;
}

PathResult shortest_path_m(const RoadNetwork& net, NodeId src, NodeId dst, TravelMode mode) {
  check_node(net, src);
  check_node(net, dst);
  if (src == dst) return PathResult{0.0, {src}};

  // Distances to dst, then a forward walk that always takes the smallest next
  // node still on some shortest path. That yields the lexicographically
  // smallest shortest node sequence.
  const std::vector<double> to_dst = dijkstra(net, dst, mode, kInf, src);
  if (!std::isfinite(to_dst[src])) {
    throw UnreachableError(fmt::format("node {} is unreachable from node {}", dst, src));
  }
  PathResult result;
  result.nodes.push_back(src);
  NodeId u = src;
  while (u != dst) {
    const double tol = 1e-9 * std::max(1.0, to_dst[u]);
    std::optional<std::pair<NodeId, double>> next;
    for (const auto& arc : net.arcs(u)) {
      const RoadEdge& e = net.edges()[arc.edge];
      if (!allows(mode, e.road_class) || !std::isfinite(to_dst[arc.to])) continue;
      if (std::abs(e.length_m + to_dst[arc.to] - to_dst[u]) <= tol) {
        if (!next || arc.to < next->first) next = std::make_pair(arc.to, e.length_m);
      }
    }
    if (!next) throw UnreachableError("shortest path reconstruction failed");
    result.distance_m += next->second;
    u = next->first;
    result.nodes.push_back(u);
  }
  return result;
}

std::vector<double> shortest_distances_m(const RoadNetwork& net, NodeId src, TravelMode mode, double cutoff_m) {
  check_node(net, src);
  return dijkstra(net, src, mode, cutoff_m, std::nullopt);
}

double bike_time_min(double distance_m) {
  if (!(distance_m >= 0.0)) throw InvalidArgument(fmt::format("negative distance {}", distance_m));
  return distance_m / kBikeSpeedMPerMin;
}

ReachableEntrances reachable_entrances(const GeoPoint& location, const CitySnapshot& snap, double radius_m) {
  ReachableEntrances out;
  std::vector<const SubwayEntrance*> near;
  for (const SubwayEntrance& e : snap.entrances) {
    if (haversine_m(location, e.location) <= radius_m) near.push_back(&e);
  }
  if (near.empty()) return out;

  NodeId origin = 0;
  try {
    origin = bikeaccess::snap(location, snap.network, TravelMode::bike);
  } catch (const SnapError& e) {
    out.warnings.push_back(fmt::format("station off network, {} entrance(s) dropped: {}", near.size(), e.what()));
    return out;
  }
  const std::vector<double> dist = shortest_distances_m(snap.network, origin, TravelMode::bike);
  for (const SubwayEntrance* e : near) {
    NodeId target = 0;
    try {
      target = bikeaccess::snap(e->location, snap.network, TravelMode::bike);
    } catch (const SnapError& err) {
      out.warnings.push_back(fmt::format("entrance '{}' dropped: {}", e->entrance_id, err.what()));
      continue;
    }
    if (!std::isfinite(dist[target])) {
      out.warnings.push_back(fmt::format("entrance '{}' dropped: unreachable by bike", e->entrance_id));
      continue;
    }
    out.entrances.push_back(EntranceTime{e, bike_time_min(dist[target]), dist[target]});
  }
  return out;
}

}  // namespace bikeaccess
