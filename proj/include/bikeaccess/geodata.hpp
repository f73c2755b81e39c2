#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bikeaccess/geo.hpp"

namespace bikeaccess {

// ---------------------------------------------------------------------------
// Calendar month
// ---------------------------------------------------------------------------

struct Month {
  int year = 2000;
  int month = 1;  // 1..12

  // Months since year 0; differences are month counts.
  int index() const { return year * 12 + (month - 1); }
  static Month from_index(int index) { return Month{index / 12, index % 12 + 1}; }

  // "YYYY-MM"; throws InvalidArgument on anything else.
  static Month parse(std::string_view text);
  std::string str() const;

  friend auto operator<=>(const Month&, const Month&) = default;
};

// ---------------------------------------------------------------------------
// Road network
// ---------------------------------------------------------------------------

enum class RoadClass : std::uint8_t {
  motorway,
  trunk,
  primary,
  secondary,
  tertiary,
  unclassified,
  residential,
  living_street,
};

inline constexpr std::size_t kRoadClassCount = 8;
inline constexpr std::array<RoadClass, kRoadClassCount> kAllRoadClasses = {
    RoadClass::motorway,     RoadClass::trunk,       RoadClass::primary,
    RoadClass::secondary,    RoadClass::tertiary,    RoadClass::unclassified,
    RoadClass::residential,  RoadClass::living_street};

std::string_view to_string(RoadClass cls);
std::optional<RoadClass> parse_road_class(std::string_view name);

using NodeId = std::uint32_t;

struct RoadEdge {
  NodeId u = 0;
  NodeId v = 0;
  double length_m = 0.0;
  RoadClass road_class = RoadClass::residential;
  bool bike_lane = false;
};

// Undirected graph. Node ids are dense indices into nodes().
class RoadNetwork {
 public:
  struct Arc {
    NodeId to;
    std::uint32_t edge;
  };

  RoadNetwork() = default;
  // Validates endpoints and lengths; throws IntegrityError / DomainError.
  RoadNetwork(std::vector<GeoPoint> nodes, std::vector<RoadEdge> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<GeoPoint>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const GeoPoint& node(NodeId id) const { return nodes_.at(id); }
  std::span<const Arc> arcs(NodeId id) const;

 private:
  std::vector<GeoPoint> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::uint32_t> offsets_;
  std::vector<Arc> arcs_;
};

// Node-dedup key: coordinates rounded to 7 decimals.
double round_coordinate(double degrees);

// ---------------------------------------------------------------------------
// Transit, POIs, zones
// ---------------------------------------------------------------------------

struct SubwayEntrance {
  std::string entrance_id;
  std::string station_id;  // parent subway station
  GeoPoint location;
};

struct ServiceSchedule {
  std::string station_id;
  std::vector<double> arrivals;  // minutes past midnight, sorted, in [0, 1440)

  // Arrivals in [begin, end).
  int count_in(double begin, double end) const;
};

enum class PoiCategory : std::uint8_t {
  residential,
  educational,
  cultural,
  recreational,
  commercial,
  religious,
  transportation,
  government,
  health,
  social,
};

inline constexpr std::size_t kPoiCategoryCount = 10;
std::string_view to_string(PoiCategory cat);
std::optional<PoiCategory> parse_poi_category(std::string_view name);

struct Poi {
  std::string poi_id;
  GeoPoint location;
  PoiCategory category = PoiCategory::residential;
};

struct Zone {
  std::string zone_id;
  std::vector<GeoPoint> ring;  // closed: front() == back()
  double pop_white = 0.0;
  double pop_black = 0.0;
  double pop_asian = 0.0;
  double pop_hispanic = 0.0;
  double median_income = 0.0;
  double pop_density = 0.0;  // persons / km^2
};

// Ray casting, boundary inclusive. Overlaps resolve to the smallest zone_id.
const Zone* zone_of(const GeoPoint& p, std::span<const Zone> zones);

// ---------------------------------------------------------------------------
// Stations and features
// ---------------------------------------------------------------------------

// Layout of the 29 static features.
namespace feature {
inline constexpr std::size_t kRoadLength = 0;       // 7 slots, motorway..residential, metres
inline constexpr std::size_t kPoiCount = 7;         // 10 slots, PoiCategory order
inline constexpr std::size_t kEntranceCount = 17;   // entrances within the buffer
inline constexpr std::size_t kNearestSubwayM = 18;  // metres to nearest subway station
inline constexpr std::size_t kPopDensity = 19;
inline constexpr std::size_t kShares = 20;  // white, black, asian, hispanic, 5 reserved (always 0)
inline constexpr std::size_t kCount = 29;
inline constexpr double kBufferM = 500.0;
}  // namespace feature

using FeatureVector = std::array<double, feature::kCount>;

// Layout of the 6 monthly features.
namespace monthly {
inline constexpr std::size_t kBikeLaneM = 0;
inline constexpr std::size_t kStations500 = 1;
inline constexpr std::size_t kStations1000 = 2;
inline constexpr std::size_t kStations1000To5000 = 3;
inline constexpr std::size_t kMeanNeighborDistanceM = 4;
inline constexpr std::size_t kAgeMonths = 5;
inline constexpr std::size_t kCount = 6;
}  // namespace monthly

using MonthlyFeatures = std::array<double, monthly::kCount>;

enum class StationStatus : std::uint8_t { existing, cold_start, candidate };
std::string_view to_string(StationStatus status);
std::optional<StationStatus> parse_station_status(std::string_view name);

struct Station {
  std::string station_id;
  GeoPoint location;
  StationStatus status = StationStatus::existing;
  std::optional<Month> open_month;
  FeatureVector static_features{};
  bool outside_zones = false;  // demographic slots zeroed
  std::map<Month, double> observed_demand;

  // Operating (open, not a candidate) at the given month.
  bool operating_at(const Month& m) const;
};

struct CitySnapshot {
  RoadNetwork network;
  std::vector<Station> stations;  // sorted by station_id
  std::vector<SubwayEntrance> entrances;  // sorted by entrance_id
  std::vector<ServiceSchedule> schedules;  // sorted by station_id
  std::vector<Zone> zones;  // sorted by zone_id
  std::vector<Poi> pois;  // sorted by poi_id
  std::vector<std::string> warnings;

  const Station* find_station(std::string_view id) const;
  const ServiceSchedule* find_schedule(std::string_view subway_station_id) const;
};

struct FeatureBuild {
  FeatureVector values{};
  bool outside_zones = false;
};

// Static built-environment features within the 500 m straight-line buffer.
// An edge counts with its full length iff both endpoints are inside the buffer.
FeatureBuild build_feature_vector(const GeoPoint& location, const CitySnapshot& snap);

// Monthly context features. `self_id` is excluded from the station counts.
MonthlyFeatures monthly_features(const GeoPoint& location, std::string_view self_id,
                                 const std::optional<Month>& open_month, const Month& month,
                                 const CitySnapshot& snap);
MonthlyFeatures monthly_features(const Station& station, const Month& month,
                                 const CitySnapshot& snap);

// ---------------------------------------------------------------------------
// Loading and serialization
// ---------------------------------------------------------------------------

struct InputPaths {
  std::filesystem::path network;    // network.geojson
  std::filesystem::path stations;   // stations.csv
  std::filesystem::path demand;     // demand.csv, optional
  std::filesystem::path entrances;  // entrances.csv
  std::filesystem::path schedules;  // schedules.csv
  std::filesystem::path zones;      // zones.geojson
  std::filesystem::path pois;       // pois.csv, optional

  // Conventional file names inside `dir`; optional files are kept only if present.
  static InputPaths in_directory(const std::filesystem::path& dir);
};

// Unvalidated parts; assemble_snapshot() validates, sorts and computes features.
struct SnapshotParts {
  RoadNetwork network;
  std::vector<Station> stations;
  std::vector<SubwayEntrance> entrances;
  std::vector<ServiceSchedule> schedules;
  std::vector<Zone> zones;
  std::vector<Poi> pois;
};

CitySnapshot assemble_snapshot(SnapshotParts parts);
CitySnapshot load_city_snapshot(const InputPaths& paths);

// Writes the full file set into `dir` (created if needed) and returns its paths.
InputPaths write_city_snapshot(const CitySnapshot& snap, const std::filesystem::path& dir);

// Network from LineString coordinate lists; each segment becomes one edge.
struct RoadLine {
  std::vector<GeoPoint> points;
  RoadClass road_class = RoadClass::residential;
  bool bike_lane = false;
};
RoadNetwork build_network(std::span<const RoadLine> lines);

}  // namespace bikeaccess
