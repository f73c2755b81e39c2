#include "bikeaccess/accessibility.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "bikeaccess/routing.hpp"
#include "text_io.hpp"

namespace bikeaccess {

void AccessParams::validate() const {
  if (!(window_start >= 0.0) || !(window_end > window_start)) {
    throw InvalidArgument(fmt::format("invalid service window [{}, {})", window_start, window_end));
  }
  if (!(reliability_buffer > 0.0) || !(edf_numerator > 0.0) || !(secondary_weight > 0.0) ||
      !(entrance_radius > 0.0)) {
    throw InvalidArgument("accessibility constants must be positive");
  }
}

double edf(double t_bike_min, int trains_in_window, const AccessParams& params) {
  params.validate();
  if (!(t_bike_min >= 0.0)) throw InvalidArgument(fmt::format("negative bike time {}", t_bike_min));
  if (trains_in_window < 0) throw InvalidArgument("negative train count");
  if (trains_in_window == 0) return 0.0;
  const double wait = 0.5 * (params.period() / static_cast<double>(trains_in_window));
  return params.edf_numerator / (t_bike_min + wait + params.reliability_buffer);
}

double ptal(std::span<const double> edfs, double secondary_weight) {
  if (edfs.empty()) return 0.0;
  const auto best = std::max_element(edfs.begin(), edfs.end());
  double rest = 0.0;
  for (auto it = edfs.begin(); it != edfs.end(); ++it) {
    if (it != best) rest += *it;
  }
  return *best + secondary_weight * rest;
}

double wptal(double ptal_value, double demand) { return ptal_value * demand; }

StationAccess station_access(const GeoPoint& location, const CitySnapshot& snap, const AccessParams& params) {
  StationAccess out;
  ReachableEntrances reach = reachable_entrances(location, snap, params.entrance_radius);
  out.warnings = std::move(reach.warnings);
  out.n_entrances = static_cast<int>(reach.entrances.size());

  std::map<std::string, double> fastest;
  for (const EntranceTime& e : reach.entrances) {
    auto [it, inserted] = fastest.emplace(e.entrance->station_id, e.t_bike_min);
    if (!inserted) it->second = std::min(it->second, e.t_bike_min);
  }
  std::vector<double> values;
  for (const auto& [subway_id, t] : fastest) {
    const ServiceSchedule* sched = snap.find_schedule(subway_id);
    const int trains = sched ? sched->count_in(params.window_start, params.window_end) : 0;
    const double value = edf(t, trains, params);
    out.edfs.push_back(SubwayEdf{subway_id, t, trains, value});
    values.push_back(value);
  }
  out.ptal = ptal(values, params.secondary_weight);
  return out;
}

AccessScore score_station(const Station& station, const Month& month, const CitySnapshot& snap,
                          const DemandPredictor& demand, const AccessParams& params) {
  StationAccess access = station_access(station.location, snap, params);
  AccessScore score;
  score.station_id = station.station_id;
  score.month = month;
  score.location = station.location;
  score.edfs = std::move(access.edfs);
  score.ptal = access.ptal;
  score.n_entrances = access.n_entrances;
  score.demand = demand.predict(station, month);
  if (!std::isfinite(score.demand) || score.demand < 0.0) {
    throw ModelError(fmt::format("predicted demand {} is not a finite non-negative value", score.demand));
  }
  score.wptal = wptal(score.ptal, score.demand);
  return score;
}

ScoreBatch score_stations(std::span<const Station> stations, const CitySnapshot& snap, const Month& month,
                          const DemandPredictor& demand, const AccessParams& params) {
  params.validate();
  ScoreBatch batch;
  for (const Station& s : stations) {
    try {
      batch.scores.push_back(score_station(s, month, snap, demand, params));
    } catch (const Error& e) {
      batch.warnings.push_back(fmt::format("station '{}' skipped: {}", s.station_id, e.what()));
    }
  }
  std::sort(batch.scores.begin(), batch.scores.end(),
            [](const AccessScore& a, const AccessScore& b) { return a.station_id < b.station_id; });
  return batch;
}

ScoreBatch score_all(const CitySnapshot& snap, const Month& month, const DemandPredictor& demand,
                     const AccessParams& params) {
  std::vector<Station> targets;
  for (const Station& s : snap.stations) {
    if (s.status != StationStatus::existing) targets.push_back(s);
  }
  return score_stations(targets, snap, month, demand, params);
}

std::string scores_to_csv(std::span<const AccessScore> scores) {
  std::string out = "station_id,month,ptal,demand,wptal,n_entrances\n";
  for (const AccessScore& s : scores) {
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{}\n", io::csv_field(s.station_id), s.month.str(), s.ptal,
                       s.demand, s.wptal, s.n_entrances);
  }
  return out;
}

}  // namespace bikeaccess
