#include "bikeaccess/geodata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bikeaccess/error.hpp"
#include "text_io.hpp"

namespace bikeaccess {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Month
// ---------------------------------------------------------------------------

Month Month::parse(std::string_view text) {
  auto bad = [&] { return InvalidArgument(fmt::format("invalid month '{}', expected YYYY-MM", text)); };
  if (text.size() != 7 || text[4] != '-') throw bad();
  int y = 0;
  int m = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (text[i] < '0' || text[i] > '9') throw bad();
    y = y * 10 + (text[i] - '0');
  }
  for (std::size_t i = 5; i < 7; ++i) {
    if (text[i] < '0' || text[i] > '9') throw bad();
    m = m * 10 + (text[i] - '0');
  }
  if (m < 1 || m > 12) throw bad();
  return Month{y, m};
}

std::string Month::str() const { return fmt::format("{:04d}-{:02d}", year, month); }

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, kRoadClassCount> kRoadClassNames = {
    "motorway", "trunk", "primary", "secondary", "tertiary", "unclassified", "residential", "living_street"};

constexpr std::array<std::string_view, kPoiCategoryCount> kPoiNames = {
    "residential", "educational", "cultural",   "recreational", "commercial",
    "religious",   "transportation", "government", "health",     "social"};

constexpr std::array<std::string_view, 3> kStatusNames = {"existing", "cold_start", "candidate"};

}  // namespace

std::string_view to_string(RoadClass cls) { return kRoadClassNames[static_cast<std::size_t>(cls)]; }

std::optional<RoadClass> parse_road_class(std::string_view name) {
  for (std::size_t i = 0; i < kRoadClassNames.size(); ++i) {
    if (kRoadClassNames[i] == name) return static_cast<RoadClass>(i);
  }
  return std::nullopt;
}

std::string_view to_string(PoiCategory cat) { return kPoiNames[static_cast<std::size_t>(cat)]; }

std::optional<PoiCategory> parse_poi_category(std::string_view name) {
  for (std::size_t i = 0; i < kPoiNames.size(); ++i) {
    if (kPoiNames[i] == name) return static_cast<PoiCategory>(i);
  }
  return std::nullopt;
}

std::string_view to_string(StationStatus status) { return kStatusNames[static_cast<std::size_t>(status)]; }

std::optional<StationStatus> parse_station_status(std::string_view name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == name) return static_cast<StationStatus>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// RoadNetwork
// ---------------------------------------------------------------------------

RoadNetwork::RoadNetwork(std::vector<GeoPoint> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!is_valid(nodes_[i])) throw DomainError(fmt::format("node {} has invalid coordinates", i));
  }
  std::vector<std::uint32_t> degree(nodes_.size() + 1, 0);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const RoadEdge& e = edges_[i];
    if (e.u >= nodes_.size() || e.v >= nodes_.size()) {
      throw IntegrityError(fmt::format("edge {} references a missing node", i));
    }
    if (!(e.length_m > 0.0) || !std::isfinite(e.length_m)) {
      throw DomainError(fmt::format("edge {} has non-positive length {}", i, e.length_m));
    }
    ++degree[e.u + 1];
    ++degree[e.v + 1];
  }
  offsets_.assign(nodes_.size() + 1, 0);
  for (std::size_t i = 1; i < degree.size(); ++i) offsets_[i] = offsets_[i - 1] + degree[i];
  arcs_.resize(offsets_.back());
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t i = 0; i < edges_.size(); ++i) {
    const RoadEdge& e = edges_[i];
    arcs_[fill[e.u]++] = Arc{e.v, i};
    arcs_[fill[e.v]++] = Arc{e.u, i};
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    std::sort(arcs_.begin() + offsets_[n], arcs_.begin() + offsets_[n + 1],
              [](const Arc& a, const Arc& b) { return a.to != b.to ? a.to < b.to : a.edge < b.edge; });
  }
}

std::span<const RoadNetwork::Arc> RoadNetwork::arcs(NodeId id) const {
  if (id >= nodes_.size()) return {};
  return std::span<const Arc>(arcs_.data() + offsets_[id], offsets_[id + 1] - offsets_[id]);
}

double round_coordinate(double degrees) { return static_cast<double>(std::llround(degrees * 1e7)) / 1e7; }

RoadNetwork build_network(std::span<const RoadLine> lines) {
  std::set<std::pair<long long, long long>> keys;
  auto key_of = [](const GeoPoint& p) {
    return std::make_pair(std::llround(p.lon * 1e7), std::llround(p.lat * 1e7));
  };
  for (const RoadLine& line : lines) {
    for (const GeoPoint& p : line.points) keys.insert(key_of(p));
  }
  std::vector<GeoPoint> nodes;
  nodes.reserve(keys.size());
  std::map<std::pair<long long, long long>, NodeId> index;
  for (const auto& k : keys) {
    index.emplace(k, static_cast<NodeId>(nodes.size()));
    nodes.push_back(GeoPoint{static_cast<double>(k.first) / 1e7, static_cast<double>(k.second) / 1e7});
  }
  std::vector<RoadEdge> edges;
  for (const RoadLine& line : lines) {
    for (std::size_t i = 1; i < line.points.size(); ++i) {
      const NodeId u = index.at(key_of(line.points[i - 1]));
      const NodeId v = index.at(key_of(line.points[i]));
      if (u == v) continue;
      const double len = haversine_m(nodes[u], nodes[v]);
      if (!(len > 0.0)) continue;
      edges.push_back(RoadEdge{u, v, len, line.road_class, line.bike_lane});
    }
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

// ---------------------------------------------------------------------------
// Schedules, zones, stations
// ---------------------------------------------------------------------------

int ServiceSchedule::count_in(double begin, double end) const {
  auto lo = std::lower_bound(arrivals.begin(), arrivals.end(), begin);
  auto hi = std::lower_bound(arrivals.begin(), arrivals.end(), end);
  return hi > lo ? static_cast<int>(hi - lo) : 0;
}

const Zone* zone_of(const GeoPoint& p, std::span<const Zone> zones) {
  const Zone* best = nullptr;
  for (const Zone& z : zones) {
    if (best && z.zone_id >= best->zone_id) continue;
    if (ring_contains(z.ring, p)) best = &z;
  }
  return best;
}

bool Station::operating_at(const Month& m) const {
  return status != StationStatus::candidate && open_month && *open_month <= m;
}

const Station* CitySnapshot::find_station(std::string_view id) const {
  auto it = std::lower_bound(stations.begin(), stations.end(), id,
                             [](const Station& s, std::string_view v) { return s.station_id < v; });
  return it != stations.end() && it->station_id == id ? &*it : nullptr;
}

const ServiceSchedule* CitySnapshot::find_schedule(std::string_view subway_station_id) const {
  auto it = std::lower_bound(schedules.begin(), schedules.end(), subway_station_id,
                             [](const ServiceSchedule& s, std::string_view v) { return s.station_id < v; });
  return it != schedules.end() && it->station_id == subway_station_id ? &*it : nullptr;
}

FeatureBuild build_feature_vector(const GeoPoint& location, const CitySnapshot& snap) {
  FeatureBuild out;
  FeatureVector& f = out.values;
  const auto& net = snap.network;

  std::vector<char> inside(net.node_count(), 0);
  for (std::size_t n = 0; n < net.node_count(); ++n) {
    inside[n] = haversine_m(location, net.nodes()[n]) <= feature::kBufferM;
  }
  for (const RoadEdge& e : net.edges()) {
    const auto cls = static_cast<std::size_t>(e.road_class);
    if (cls >= 7) continue;  // living_street has no feature slot
    if (inside[e.u] && inside[e.v]) f[feature::kRoadLength + cls] += e.length_m;
  }

  for (const Poi& poi : snap.pois) {
    if (haversine_m(location, poi.location) <= feature::kBufferM) {
      f[feature::kPoiCount + static_cast<std::size_t>(poi.category)] += 1.0;
    }
  }

  double nearest = std::numeric_limits<double>::infinity();
  for (const SubwayEntrance& e : snap.entrances) {
    const double d = haversine_m(location, e.location);
    if (d <= feature::kBufferM) f[feature::kEntranceCount] += 1.0;
    nearest = std::min(nearest, d);
  }
  f[feature::kNearestSubwayM] = std::isfinite(nearest) ? nearest : 0.0;

  const Zone* zone = zone_of(location, snap.zones);
  if (!zone) {
    out.outside_zones = true;
    return out;
  }
  f[feature::kPopDensity] = zone->pop_density;
  const double total = zone->pop_white + zone->pop_black + zone->pop_asian + zone->pop_hispanic;
  if (total > 0.0) {
    f[feature::kShares + 0] = zone->pop_white / total;
    f[feature::kShares + 1] = zone->pop_black / total;
    f[feature::kShares + 2] = zone->pop_asian / total;
    f[feature::kShares + 3] = zone->pop_hispanic / total;
  }
  return out;
}

MonthlyFeatures monthly_features(const GeoPoint& location, std::string_view self_id,
                                 const std::optional<Month>& open_month, const Month& month,
                                 const CitySnapshot& snap) {
  MonthlyFeatures f{};
  const auto& net = snap.network;
  for (const RoadEdge& e : net.edges()) {
    if (!e.bike_lane) continue;
    if (haversine_m(location, net.node(e.u)) <= feature::kBufferM &&
        haversine_m(location, net.node(e.v)) <= feature::kBufferM) {
      f[monthly::kBikeLaneM] += e.length_m;
    }
  }
  double dist_sum = 0.0;
  int dist_n = 0;
  for (const Station& s : snap.stations) {
    if (s.station_id == self_id || !s.operating_at(month)) continue;
    const double d = haversine_m(location, s.location);
    if (d <= 500.0) f[monthly::kStations500] += 1.0;
    if (d <= 1000.0) f[monthly::kStations1000] += 1.0;
    else if (d <= 5000.0) f[monthly::kStations1000To5000] += 1.0;
    if (d <= 5000.0) {
      dist_sum += d;
      ++dist_n;
    }
  }
  f[monthly::kMeanNeighborDistanceM] = dist_n > 0 ? dist_sum / dist_n : 0.0;
  if (open_month) f[monthly::kAgeMonths] = std::max(0, month.index() - open_month->index());
  return f;
}

MonthlyFeatures monthly_features(const Station& station, const Month& month, const CitySnapshot& snap) {
  const std::optional<Month> open =
      station.status == StationStatus::candidate ? std::optional<Month>{} : station.open_month;
  return monthly_features(station.location, station.station_id, open, month, snap);
}

// ---------------------------------------------------------------------------
// Assembly and validation
// ---------------------------------------------------------------------------

namespace {

template <class T, class Key>
void sort_unique(std::vector<T>& items, Key key, std::string_view what) {
  std::sort(items.begin(), items.end(), [&](const T& a, const T& b) { return key(a) < key(b); });
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (key(items[i]).empty()) throw IntegrityError(fmt::format("empty {}", what));
    if (i > 0 && key(items[i]) == key(items[i - 1])) {
      throw IntegrityError(fmt::format("duplicate {} '{}'", what, key(items[i])));
    }
  }
}

void validate_zone(const Zone& z) {
  if (z.ring.size() < 4) throw DomainError(fmt::format("zone '{}': ring needs at least 4 points", z.zone_id));
  if (!(z.ring.front() == z.ring.back())) throw DomainError(fmt::format("zone '{}': polygon ring is not closed", z.zone_id));
  for (const GeoPoint& p : z.ring) {
    if (!is_valid(p)) throw DomainError(fmt::format("zone '{}': invalid coordinate", z.zone_id));
  }
  for (double v : {z.pop_white, z.pop_black, z.pop_asian, z.pop_hispanic, z.median_income, z.pop_density}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DomainError(fmt::format("zone '{}': demographic values must be finite and non-negative", z.zone_id));
    }
  }
}

}  // namespace

CitySnapshot assemble_snapshot(SnapshotParts parts) {
  CitySnapshot snap;
  snap.network = std::move(parts.network);

  sort_unique(parts.stations, [](const Station& s) -> const std::string& { return s.station_id; }, "station_id");
  for (const Station& s : parts.stations) {
    if (!is_valid(s.location)) throw DomainError(fmt::format("station '{}': invalid coordinates", s.station_id));
    if (s.status != StationStatus::candidate && !s.open_month) {
      throw DomainError(fmt::format("station '{}': open_month required for status {}", s.station_id, to_string(s.status)));
    }
    for (const auto& [m, trips] : s.observed_demand) {
      if (!std::isfinite(trips) || trips < 0.0) {
        throw DomainError(fmt::format("station '{}': negative or non-finite demand in {}", s.station_id, m.str()));
      }
      if (s.status == StationStatus::cold_start && m <= *s.open_month) {
        throw DomainError(fmt::format("cold-start station '{}' has observed demand in {} at or before opening {}",
                                      s.station_id, m.str(), s.open_month->str()));
      }
    }
  }

  sort_unique(parts.entrances, [](const SubwayEntrance& e) -> const std::string& { return e.entrance_id; }, "entrance_id");
  std::unordered_set<std::string> subway_ids;
  for (const SubwayEntrance& e : parts.entrances) {
    if (e.station_id.empty()) throw IntegrityError(fmt::format("entrance '{}' has empty station_id", e.entrance_id));
    if (!is_valid(e.location)) throw DomainError(fmt::format("entrance '{}': invalid coordinates", e.entrance_id));
    subway_ids.insert(e.station_id);
  }

  // Merge duplicate schedule records for one station.
  std::map<std::string, std::vector<double>> merged;
  for (ServiceSchedule& s : parts.schedules) {
    auto& dst = merged[s.station_id];
    dst.insert(dst.end(), s.arrivals.begin(), s.arrivals.end());
  }
  for (auto& [id, arrivals] : merged) {
    if (!subway_ids.contains(id)) {
      throw IntegrityError(fmt::format("schedule references unknown subway station_id '{}'", id));
    }
    for (double a : arrivals) {
      if (!std::isfinite(a) || a < 0.0 || a >= 1440.0) {
        throw DomainError(fmt::format("schedule '{}': arrival {} outside [0, 1440)", id, a));
      }
    }
    std::sort(arrivals.begin(), arrivals.end());
    snap.schedules.push_back(ServiceSchedule{id, std::move(arrivals)});
  }

  sort_unique(parts.zones, [](const Zone& z) -> const std::string& { return z.zone_id; }, "zone_id");
  for (const Zone& z : parts.zones) validate_zone(z);

  sort_unique(parts.pois, [](const Poi& p) -> const std::string& { return p.poi_id; }, "poi_id");
  for (const Poi& p : parts.pois) {
    if (!is_valid(p.location)) throw DomainError(fmt::format("poi '{}': invalid coordinates", p.poi_id));
  }

  snap.entrances = std::move(parts.entrances);
  snap.zones = std::move(parts.zones);
  snap.pois = std::move(parts.pois);
  snap.stations = std::move(parts.stations);

  for (Station& s : snap.stations) {
    FeatureBuild fb = build_feature_vector(s.location, snap);
    s.static_features = fb.values;
    s.outside_zones = fb.outside_zones;
    if (fb.outside_zones) {
      snap.warnings.push_back(fmt::format("station '{}' lies outside all zones; demographic features zeroed", s.station_id));
    }
  }
  return snap;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

GeoPoint json_point(const json& coord, const std::string& file, std::size_t feature_index) {
  if (!coord.is_array() || coord.size() < 2 || !coord[0].is_number() || !coord[1].is_number()) {
    throw ParseError(file, 0, fmt::format("feature {}: coordinate must be [lon, lat]", feature_index));
  }
  const GeoPoint p{coord[0].get<double>(), coord[1].get<double>()};
  if (!is_valid(p)) throw DomainError(fmt::format("{}: feature {}: coordinate out of range", file, feature_index));
  return p;
}

json parse_json_file(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, fmt::format("invalid JSON at byte {}: {}", e.byte, e.what()));
  }
}

const json& features_of(const json& doc, const std::string& file) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw ParseError(file, 0, "expected a GeoJSON FeatureCollection");
  }
  return doc["features"];
}

RoadNetwork load_network(const std::filesystem::path& path) {
  const std::string file = path.string();
  const json doc = parse_json_file(path);
  std::vector<RoadLine> lines;
  std::size_t idx = 0;
  for (const json& f : features_of(doc, file)) {
    const json& geom = f.contains("geometry") ? f["geometry"] : json();
    if (!geom.is_object() || geom.value("type", "") != "LineString" || !geom.contains("coordinates")) {
      throw ParseError(file, 0, fmt::format("feature {}: geometry must be a LineString", idx));
    }
    const json props = f.value("properties", json::object());
    if (!props.contains("highway") || !props["highway"].is_string()) {
      throw ParseError(file, 0, fmt::format("feature {}: missing string property 'highway'", idx));
    }
    const auto cls = parse_road_class(props["highway"].get<std::string>());
    if (!cls) {
      throw ParseError(file, 0, fmt::format("feature {}: unknown highway class '{}'", idx,
                                            props["highway"].get<std::string>()));
    }
    RoadLine line;
    line.road_class = *cls;
    if (props.contains("bike_lane")) {
      if (!props["bike_lane"].is_boolean()) {
        throw ParseError(file, 0, fmt::format("feature {}: 'bike_lane' must be boolean", idx));
      }
      line.bike_lane = props["bike_lane"].get<bool>();
    }
    for (const json& c : geom["coordinates"]) line.points.push_back(json_point(c, file, idx));
    if (line.points.size() < 2) throw ParseError(file, 0, fmt::format("feature {}: LineString needs 2+ points", idx));
    lines.push_back(std::move(line));
    ++idx;
  }
  return build_network(lines);
}

double json_number(const json& props, const char* key, const std::string& file, std::size_t idx) {
  if (!props.contains(key) || !props[key].is_number()) {
    throw ParseError(file, 0, fmt::format("feature {}: missing numeric property '{}'", idx, key));
  }
  return props[key].get<double>();
}

std::vector<Zone> load_zones(const std::filesystem::path& path) {
  const std::string file = path.string();
  const json doc = parse_json_file(path);
  std::vector<Zone> zones;
  std::size_t idx = 0;
  for (const json& f : features_of(doc, file)) {
    const json& geom = f.contains("geometry") ? f["geometry"] : json();
    if (!geom.is_object() || geom.value("type", "") != "Polygon" || !geom.contains("coordinates") ||
        !geom["coordinates"].is_array() || geom["coordinates"].empty()) {
      throw ParseError(file, 0, fmt::format("feature {}: geometry must be a Polygon", idx));
    }
    const json props = f.value("properties", json::object());
    Zone z;
    if (props.contains("zone_id") && props["zone_id"].is_string()) {
      z.zone_id = props["zone_id"].get<std::string>();
    } else if (props.contains("zone_id") && props["zone_id"].is_number_integer()) {
      z.zone_id = std::to_string(props["zone_id"].get<long long>());
    } else {
      throw ParseError(file, 0, fmt::format("feature {}: missing property 'zone_id'", idx));
    }
    z.pop_white = json_number(props, "pop_white", file, idx);
    z.pop_black = json_number(props, "pop_black", file, idx);
    z.pop_asian = json_number(props, "pop_asian", file, idx);
    z.pop_hispanic = json_number(props, "pop_hispanic", file, idx);
    z.median_income = json_number(props, "median_income", file, idx);
    z.pop_density = json_number(props, "pop_density", file, idx);
    for (const json& c : geom["coordinates"][0]) z.ring.push_back(json_point(c, file, idx));
    zones.push_back(std::move(z));
    ++idx;
  }
  return zones;
}

}  // namespace

InputPaths InputPaths::in_directory(const std::filesystem::path& dir) {
  InputPaths p;
  p.network = dir / "network.geojson";
  p.stations = dir / "stations.csv";
  p.entrances = dir / "entrances.csv";
  p.schedules = dir / "schedules.csv";
  p.zones = dir / "zones.geojson";
  if (std::filesystem::exists(dir / "demand.csv")) p.demand = dir / "demand.csv";
  if (std::filesystem::exists(dir / "pois.csv")) p.pois = dir / "pois.csv";
  return p;
}

CitySnapshot load_city_snapshot(const InputPaths& paths) {
  SnapshotParts parts;
  parts.network = load_network(paths.network);

  {
    const std::string file = paths.stations.string();
    for (const auto& row : io::read_csv(paths.stations, {"station_id", "lon", "lat", "status", "open_month"})) {
      const auto& f = row.fields;
      Station s;
      s.station_id = f[0];
      const double lon = io::parse_double(f[1], file, row.line, "lon");
      const double lat = io::parse_double(f[2], file, row.line, "lat");
      s.location = GeoPoint{lon, lat};
      if (!is_valid(s.location)) throw ParseError(file, row.line, "coordinate out of range");
      const auto status = parse_station_status(f[3]);
      if (!status) throw ParseError(file, row.line, fmt::format("unknown status '{}'", f[3]));
      s.status = *status;
      if (!f[4].empty()) {
        try {
          s.open_month = Month::parse(f[4]);
        } catch (const InvalidArgument& e) {
          throw ParseError(file, row.line, e.what());
        }
      }
      parts.stations.push_back(std::move(s));
    }
  }

  if (!paths.demand.empty()) {
    const std::string file = paths.demand.string();
    std::map<std::string, Station*> by_id;
    for (Station& s : parts.stations) by_id[s.station_id] = &s;
    for (const auto& row : io::read_csv(paths.demand, {"station_id", "month", "trips"})) {
      const auto& f = row.fields;
      auto it = by_id.find(f[0]);
      if (it == by_id.end()) throw IntegrityError(fmt::format("{}:{}: unknown station_id '{}'", file, row.line, f[0]));
      Month m;
      try {
        m = Month::parse(f[1]);
      } catch (const InvalidArgument& e) {
        throw ParseError(file, row.line, e.what());
      }
      const double trips = io::parse_double(f[2], file, row.line, "trips");
      if (trips < 0.0) throw DomainError(fmt::format("{}:{}: negative trips", file, row.line));
      if (!it->second->observed_demand.emplace(m, trips).second) {
        throw IntegrityError(fmt::format("{}:{}: duplicate demand for '{}' in {}", file, row.line, f[0], f[1]));
      }
    }
  }

  {
    const std::string file = paths.entrances.string();
    for (const auto& row : io::read_csv(paths.entrances, {"entrance_id", "station_id", "lon", "lat"})) {
      const auto& f = row.fields;
      SubwayEntrance e{f[0], f[1], GeoPoint{io::parse_double(f[2], file, row.line, "lon"),
                                            io::parse_double(f[3], file, row.line, "lat")}};
      if (!is_valid(e.location)) throw ParseError(file, row.line, "coordinate out of range");
      parts.entrances.push_back(std::move(e));
    }
  }

  {
    const std::string file = paths.schedules.string();
    std::map<std::string, std::vector<double>> arrivals;
    for (const auto& row : io::read_csv(paths.schedules, {"station_id", "arrival_min"})) {
      const double a = io::parse_double(row.fields[1], file, row.line, "arrival_min");
      if (a < 0.0 || a >= 1440.0) throw DomainError(fmt::format("{}:{}: arrival_min outside [0, 1440)", file, row.line));
      arrivals[row.fields[0]].push_back(a);
    }
    for (auto& [id, list] : arrivals) parts.schedules.push_back(ServiceSchedule{id, std::move(list)});
  }

  parts.zones = load_zones(paths.zones);

  if (!paths.pois.empty()) {
    const std::string file = paths.pois.string();
    for (const auto& row : io::read_csv(paths.pois, {"poi_id", "lon", "lat", "category"})) {
      const auto& f = row.fields;
      const auto cat = parse_poi_category(f[3]);
      if (!cat) throw ParseError(file, row.line, fmt::format("unknown POI category '{}'", f[3]));
      Poi p{f[0], GeoPoint{io::parse_double(f[1], file, row.line, "lon"),
                           io::parse_double(f[2], file, row.line, "lat")}, *cat};
      if (!is_valid(p.location)) throw ParseError(file, row.line, "coordinate out of range");
      parts.pois.push_back(std::move(p));
    }
  }

  return assemble_snapshot(std::move(parts));
}

InputPaths write_city_snapshot(const CitySnapshot& snap, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  InputPaths paths;
  paths.network = dir / "network.geojson";
  paths.stations = dir / "stations.csv";
  paths.demand = dir / "demand.csv";
  paths.entrances = dir / "entrances.csv";
  paths.schedules = dir / "schedules.csv";
  paths.zones = dir / "zones.geojson";
  paths.pois = dir / "pois.csv";

  json net = {{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const RoadEdge& e : snap.network.edges()) {
    const GeoPoint& a = snap.network.node(e.u);
    const GeoPoint& b = snap.network.node(e.v);
    json props = {{"highway", std::string(to_string(e.road_class))}};
    if (e.bike_lane) props["bike_lane"] = true;
    net["features"].push_back({{"type", "Feature"},
                               {"properties", props},
                               {"geometry", {{"type", "LineString"}, {"coordinates", {{a.lon, a.lat}, {b.lon, b.lat}}}}}});
  }
  io::write_file(paths.network, net.dump() + "\n");

  std::string stations = "station_id,lon,lat,status,open_month\n";
  std::string demand = "station_id,month,trips\n";
  for (const Station& s : snap.stations) {
    stations += fmt::format("{},{},{},{},{}\n", io::csv_field(s.station_id), s.location.lon, s.location.lat,
                            to_string(s.status), s.open_month ? s.open_month->str() : "");
    for (const auto& [m, trips] : s.observed_demand) {
      demand += fmt::format("{},{},{}\n", io::csv_field(s.station_id), m.str(), trips);
    }
  }
  io::write_file(paths.stations, stations);
  io::write_file(paths.demand, demand);

  std::string entrances = "entrance_id,station_id,lon,lat\n";
  for (const SubwayEntrance& e : snap.entrances) {
    entrances += fmt::format("{},{},{},{}\n", io::csv_field(e.entrance_id), io::csv_field(e.station_id),
                             e.location.lon, e.location.lat);
  }
  io::write_file(paths.entrances, entrances);

  std::string schedules = "station_id,arrival_min\n";
  for (const ServiceSchedule& s : snap.schedules) {
    for (double a : s.arrivals) schedules += fmt::format("{},{}\n", io::csv_field(s.station_id), a);
  }
  io::write_file(paths.schedules, schedules);

  json zones = {{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const Zone& z : snap.zones) {
    json ring = json::array();
    for (const GeoPoint& p : z.ring) ring.push_back({p.lon, p.lat});
    zones["features"].push_back({{"type", "Feature"},
                                 {"properties",
                                  {{"zone_id", z.zone_id},
                                   {"pop_white", z.pop_white},
                                   {"pop_black", z.pop_black},
                                   {"pop_asian", z.pop_asian},
                                   {"pop_hispanic", z.pop_hispanic},
                                   {"median_income", z.median_income},
                                   {"pop_density", z.pop_density}}},
                                 {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  io::write_file(paths.zones, zones.dump() + "\n");

  std::string pois = "poi_id,lon,lat,category\n";
  for (const Poi& p : snap.pois) {
    pois += fmt::format("{},{},{},{}\n", io::csv_field(p.poi_id), p.location.lon, p.location.lat, to_string(p.category));
  }
  io::write_file(paths.pois, pois);
  return paths;
}

}  // namespace bikeaccess
