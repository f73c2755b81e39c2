#include "bikeaccess/placement.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "bikeaccess/geo.hpp"
#include "text_io.hpp"

namespace bikeaccess {

void PlacementParams::validate() const {
  if (!(min_spacing_m > 0.0) || !std::isfinite(min_spacing_m)) {
    throw InvalidArgument(fmt::format("min_spacing_m must be positive, got {}", min_spacing_m));
  }
  if (walkable_classes.empty()) throw InvalidArgument("walkable_classes must not be empty");
}

bool PlacementParams::walkable(RoadClass cls) const {
  return std::find(walkable_classes.begin(), walkable_classes.end(), cls) != walkable_classes.end();
}

std::vector<const Zone*> qualifying_zones(std::span<const Zone> zones, EquityFilter filter) {
  std::vector<const Zone*> out;
  if (zones.empty()) return out;
  std::vector<double> incomes;
  for (const Zone& z : zones) incomes.push_back(z.median_income);
  const double median = percentile_linear(incomes, 0.5);
  for (const Zone& z : zones) {
    const bool low_income = z.median_income < median;
    const bool minority = z.pop_black + z.pop_asian + z.pop_hispanic > z.pop_white;
    const bool ok = filter == EquityFilter::income_or_minority ? (low_income || minority) : (low_income && minority);
    if (ok) out.push_back(&z);
  }
  return out;
}

std::string candidate_id_for(NodeId node) { return fmt::format("c{:07d}", node); }

std::vector<Candidate> candidate_sites(const CitySnapshot& snap, const PlacementParams& params) {
  params.validate();
  const RoadNetwork& net = snap.network;
  std::vector<char> on_walkable(net.node_count(), 0);
  for (const RoadEdge& e : net.edges()) {
    if (params.walkable(e.road_class)) on_walkable[e.u] = on_walkable[e.v] = 1;
  }
  const std::vector<const Zone*> qualifying = qualifying_zones(snap.zones, params.equity_filter);
  std::vector<GeoPoint> sited;
  for (const Station& s : snap.stations) {
    if (s.status != StationStatus::candidate) sited.push_back(s.location);
  }

  std::vector<Candidate> out;
  for (NodeId id = 0; id < net.node_count(); ++id) {
    if (!on_walkable[id]) continue;
    const GeoPoint& p = net.node(id);
    const Zone* zone = zone_of(p, snap.zones);
    if (!zone || std::find(qualifying.begin(), qualifying.end(), zone) == qualifying.end()) continue;
    const bool spaced = std::all_of(sited.begin(), sited.end(),
                                    [&](const GeoPoint& q) { return haversine_m(p, q) >= params.min_spacing_m; });
    if (spaced) out.push_back(Candidate{candidate_id_for(id), id, p});
  }
  return out;
}

CandidateScores score_candidates(std::span<const Candidate> candidates, const CitySnapshot& snap, const Month& month,
                                 const DemandPredictor& demand, const AccessParams& access) {
  access.validate();
  CandidateScores out;
  for (const Candidate& c : candidates) {
    Station s;
    s.station_id = c.candidate_id;
    s.location = c.location;
    s.status = StationStatus::cold_start;
    s.open_month = month;
    try {
      const FeatureBuild fb = build_feature_vector(c.location, snap);
      s.static_features = fb.values;
      s.outside_zones = fb.outside_zones;
      out.scored.push_back(ScoredCandidate{c.candidate_id, c.node, score_station(s, month, snap, demand, access)});
    } catch (const Error& e) {
      out.warnings.push_back(fmt::format("candidate '{}' skipped: {}", c.candidate_id, e.what()));
    }
  }
  return out;
}

std::vector<ScoredCandidate> recommend(std::span<const ScoredCandidate> scored, int n, const PlacementParams& params) {
  params.validate();
  if (n < 0) throw InvalidArgument(fmt::format("recommendation count must be non-negative, got {}", n));
  std::vector<const ScoredCandidate*> order;
  for (const ScoredCandidate& c : scored) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const ScoredCandidate* a, const ScoredCandidate* b) {
    if (a->score.wptal != b->score.wptal) return a->score.wptal > b->score.wptal;
    return a->candidate_id < b->candidate_id;
  });
  std::vector<ScoredCandidate> picked;
  for (const ScoredCandidate* c : order) {
    if (static_cast<int>(picked.size()) >= n) break;
    const bool spaced = std::all_of(picked.begin(), picked.end(), [&](const ScoredCandidate& p) {
      return haversine_m(c->score.location, p.score.location) >= params.min_spacing_m;
    });
    if (spaced) picked.push_back(*c);
  }
  return picked;
}

std::vector<CurvePoint> equity_curve(std::span<const AccessScore> base, std::span<const ScoredCandidate> recommendations,
                                     std::span<const int> increments, const CitySnapshot& snap) {
  for (std::size_t i = 0; i < increments.size(); ++i) {
    if (increments[i] < 0) throw InvalidArgument("increments must be non-negative");
    if (i > 0 && increments[i] < increments[i - 1]) throw InvalidArgument("increments must be ascending");
  }
  EquityAccumulator acc(snap);
  for (const AccessScore& s : base) acc.add(s);
  std::vector<CurvePoint> out;
  int added = 0;
  const int available = static_cast<int>(recommendations.size());
  for (int requested : increments) {
    const int target = std::min(requested, available);
    for (; added < target; ++added) acc.add(recommendations[static_cast<std::size_t>(added)].score);
    out.push_back(CurvePoint{requested, target, acc.report()});
  }
  return out;
}

std::string recommendations_to_csv(std::span<const ScoredCandidate> selection) {
  std::string out = "rank,candidate_id,lon,lat,demand,ptal,wptal\n";
  int rank = 1;
  for (const ScoredCandidate& c : selection) {
    out += fmt::format("{},{},{:.7f},{:.7f},{:.6f},{:.6f},{:.6f}\n", rank++, io::csv_field(c.candidate_id),
                       c.score.location.lon, c.score.location.lat, c.score.demand, c.score.ptal, c.score.wptal);
  }
  return out;
}

nlohmann::ordered_json recommendations_to_json(std::span<const ScoredCandidate> selection) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  int rank = 1;
  for (const ScoredCandidate& c : selection) {
    list.push_back({{"rank", rank++},
                    {"candidate_id", c.candidate_id},
                    {"coordinates", {c.score.location.lon, c.score.location.lat}},
                    {"demand", c.score.demand},
                    {"ptal", c.score.ptal},
                    {"wptal", c.score.wptal},
                    {"n_entrances", c.score.n_entrances}});
  }
  return list;
}

nlohmann::ordered_json curve_to_json(std::span<const CurvePoint> curve) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const CurvePoint& p : curve) {
    nlohmann::ordered_json entry = to_json(p.report);
    entry["requested"] = p.requested;
    entry["used"] = p.used;
    out[std::to_string(p.requested)] = std::move(entry);
  }
  return out;
}

std::vector<AccessScore> parse_recommendations_csv(std::string_view text, const Month& month, std::string_view name) {
  const auto rows =
      io::parse_csv(text, name, {"rank", "candidate_id", "lon", "lat", "demand", "ptal", "wptal"});
  std::vector<AccessScore> out;
  for (const io::CsvRow& r : rows) {
    AccessScore s;
    s.station_id = r.fields[1];
    s.month = month;
    s.location = make_point(io::parse_double(r.fields[2], name, r.line, "lon"),
                            io::parse_double(r.fields[3], name, r.line, "lat"));
    s.demand = io::parse_double(r.fields[4], name, r.line, "demand");
    s.ptal = io::parse_double(r.fields[5], name, r.line, "ptal");
    s.wptal = io::parse_double(r.fields[6], name, r.line, "wptal");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bikeaccess
