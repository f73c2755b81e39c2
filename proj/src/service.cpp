#include "bikeaccess/service.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "bikeaccess/routing.hpp"

namespace bikeaccess {

using ojson = nlohmann::ordered_json;

std::string pin_id_for(const GeoPoint& p) {
  return fmt::format("pin_{}_{}", std::llround(p.lon * 1e6), std::llround(p.lat * 1e6));
}

namespace {

ojson point_json(const GeoPoint& p) { return ojson::array({p.lon, p.lat}); }

ojson score_json(const AccessScore& s) {
  return ojson{{"station_id", s.station_id}, {"coordinates", point_json(s.location)},
               {"ptal", s.ptal},             {"demand", s.demand},
               {"wptal", s.wptal},           {"n_entrances", s.n_entrances}};
}

ojson delta_json(const EquityReport& before, const EquityReport& after, GroupVariable v) {
  const auto& b = before.of(v).gini;
  const auto& a = after.of(v).gini;
  return (a && b) ? ojson(*a - *b) : ojson(nullptr);
}

}  // namespace

ojson evaluate_whatif(const Scenario& scenario, const Engine& engine) {
  const CitySnapshot& snap = engine.snapshot();
  const ScoreBatch& base = engine.scores(scenario.month);
  const auto removed = [&](const std::string& id) { return scenario.removed_station_ids.count(id) > 0; };

  // Pins join an edited copy of the snapshot as cold-start stations, so the
  // features of their neighbors see them too.
  SnapshotParts parts{snap.network, {}, snap.entrances, snap.schedules, snap.zones, snap.pois};
  for (const Station& s : snap.stations) {
    if (!removed(s.station_id)) parts.stations.push_back(s);
  }
  std::vector<ojson> entries;
  for (const auto& [id, point] : scenario.added_candidates) {
    if (removed(id)) continue;
    ojson entry{{"candidate_id", id}, {"coordinates", point_json(point)}};
    try {
      if (snap.find_station(id)) throw InvalidArgument(fmt::format("pin id '{}' collides with a station", id));
      bikeaccess::snap(point, snap.network, TravelMode::bike);
      Station st;
      st.station_id = id;
      st.location = point;
      st.status = StationStatus::cold_start;
      st.open_month = scenario.month;
      parts.stations.push_back(std::move(st));
    } catch (const Error& e) {
      entry["ok"] = false;
      entry["error"] = e.what();
    }
    entries.push_back(std::move(entry));
  }

  const std::unique_ptr<Engine> edited = engine.with_snapshot(assemble_snapshot(std::move(parts)));
  const std::vector<AccessScore>& after = edited->scores(scenario.month).scores;

  ojson candidates = ojson::array();
  for (ojson& entry : entries) {
    const std::string id = entry["candidate_id"].get<std::string>();
    if (!entry.contains("ok")) {
      const auto it = std::find_if(after.begin(), after.end(), [&](const AccessScore& a) { return a.station_id == id; });
      if (it == after.end()) {
        entry["ok"] = false;
        entry["error"] = fmt::format("no demand prediction for pin '{}'", id);
      } else {
        entry["ok"] = true;
        entry["ptal"] = it->ptal;
        entry["demand"] = it->demand;
        entry["wptal"] = it->wptal;
        entry["n_entrances"] = it->n_entrances;
      }
    }
    candidates.push_back(std::move(entry));
  }

  const EquityReport before_report = equity_report(base.scores, snap);
  const EquityReport after_report = equity_report(after, edited->snapshot());

  ojson removed_list = ojson::array();
  for (const std::string& id : scenario.removed_station_ids) {
    removed_list.push_back({{"station_id", id}, {"found", snap.find_station(id) != nullptr}});
  }

  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["scenario_id"] = scenario.scenario_id;
  j["month"] = scenario.month.str();
  j["candidates"] = std::move(candidates);
  j["removed"] = std::move(removed_list);
  j["equity_before"] = to_json(before_report);
  j["equity_after"] = to_json(after_report);
  j["gini_delta"] = {{"ethnicity", delta_json(before_report, after_report, GroupVariable::ethnicity)},
                     {"income", delta_json(before_report, after_report, GroupVariable::income)}};
  return j;
}

// ---------------------------------------------------------------------------

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Parse:
    case ErrorCode::Domain:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::Capacity:
      return 409;
    case ErrorCode::Snap:
    case ErrorCode::Unreachable:
      return 422;
    case ErrorCode::Model:
      return 503;
    default:
      return 500;
  }
}

HttpResponse json_response(const ojson& j, int status = 200) { return HttpResponse{status, "application/json", dump_json(j)}; }

HttpResponse error_response(int status, std::string_view code, std::string_view message) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["error"] = {{"code", code}, {"message", message}};
  return json_response(j, status);
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
      out += static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2]));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view part = query.substr(0, amp);
    const auto eq = part.find('=');
    if (!part.empty()) {
      out[url_decode(part.substr(0, eq))] = eq == std::string_view::npos ? "" : url_decode(part.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return out;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  while (!path.empty()) {
    while (!path.empty() && path.front() == '/') path.remove_prefix(1);
    const auto slash = path.find('/');
    if (!path.empty()) out.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return out;
}

ojson parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return ojson::object();
  ojson j = ojson::parse(body);
  if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
  return j;
}

GeoPoint point_from_json(const ojson& v) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw InvalidArgument("points must be [lon, lat] arrays");
  }
  return make_point(v[0].get<double>(), v[1].get<double>());
}

}  // namespace

Service::Service(std::shared_ptr<const Engine> engine, Month default_month, std::size_t capacity)
    : engine_(std::move(engine)), default_month_(default_month), capacity_(capacity) {
  if (!engine_) throw InvalidArgument("service needs an engine");
  if (capacity_ == 0) throw InvalidArgument("scenario capacity must be positive");
}

std::size_t Service::scenario_count() const {
  std::lock_guard lock(table_mutex_);
  return scenarios_.size();
}

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view query,
                             std::string_view body) {
  try {
    const auto parts = split_path(path);
    const auto params = parse_query(query);
    auto month = [&] {
      const auto it = params.find("month");
      return it == params.end() || it->second.empty() ? default_month_ : Month::parse(it->second);
    };
    if (parts.size() < 2 || parts[0] != "api") return error_response(404, "not_found", "unknown endpoint");
    const std::string_view head = parts[1];
    if (method == "GET" && parts.size() == 3 && head == "snapshot" && parts[2] == "summary") return summary();
    if (method == "GET" && parts.size() == 2 && head == "stations") return stations(month());
    if (method == "GET" && parts.size() == 2 && head == "zones") return zones();
    if (method == "GET" && parts.size() == 2 && head == "score") {
      return HttpResponse{200, "text/csv", engine_->wptal_csv(month())};
    }
    if (method == "POST" && parts.size() == 2 && head == "recommend") return recommend(body);
    if (head == "scenario") {
      if (method == "POST" && parts.size() == 2) return create_scenario(body);
      if (parts.size() >= 3) {
        const std::string id(parts[2]);
        if (method == "DELETE" && parts.size() == 3) return delete_scenario(id);
        if (method == "PUT" && parts.size() == 4 && parts[3] == "candidates") return update_candidates(id, body);
        if (method == "GET" && parts.size() == 4 && parts[3] == "evaluate") return evaluate(id);
      }
    }
    return error_response(404, "not_found", fmt::format("no route for {} {}", method, path));
  } catch (const Error& e) {
    return error_response(http_status(e.code()), to_string(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, to_string(ErrorCode::Parse), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse Service::summary() const {
  const CitySnapshot& snap = engine_->snapshot();
  std::map<StationStatus, int> by_status;
  for (const Station& s : snap.stations) ++by_status[s.status];
  std::set<std::string> subway;
  for (const SubwayEntrance& e : snap.entrances) subway.insert(e.station_id);

  double min_lon = 0, min_lat = 0, max_lon = 0, max_lat = 0;
  bool first = true;
  auto extend = [&](const GeoPoint& p) {
    if (first) {
      min_lon = max_lon = p.lon;
      min_lat = max_lat = p.lat;
      first = false;
      return;
    }
    min_lon = std::min(min_lon, p.lon);
    max_lon = std::max(max_lon, p.lon);
    min_lat = std::min(min_lat, p.lat);
    max_lat = std::max(max_lat, p.lat);
  };
  for (const GeoPoint& p : snap.network.nodes()) extend(p);
  for (const Station& s : snap.stations) extend(s.location);
  for (const Zone& z : snap.zones) {
    for (const GeoPoint& p : z.ring) extend(p);
  }

  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["default_month"] = default_month_.str();
  j["has_model"] = engine_->has_model();
  j["counts"] = {{"nodes", snap.network.node_count()},
                 {"edges", snap.network.edges().size()},
                 {"stations", snap.stations.size()},
                 {"existing", by_status[StationStatus::existing]},
                 {"cold_start", by_status[StationStatus::cold_start]},
                 {"candidate", by_status[StationStatus::candidate]},
                 {"entrances", snap.entrances.size()},
                 {"subway_stations", subway.size()},
                 {"zones", snap.zones.size()},
                 {"pois", snap.pois.size()}};
  j["bbox"] = first ? ojson(nullptr) : ojson::array({min_lon, min_lat, max_lon, max_lat});
  return json_response(j);
}

HttpResponse Service::stations(const Month& month) const {
  const ScoreBatch& batch = engine_->scores(month);
  ojson list = ojson::array();
  std::vector<double> values;
  for (const AccessScore& s : batch.scores) {
    ojson entry = score_json(s);
    entry["status"] = std::string(to_string(engine_->snapshot().find_station(s.station_id)->status));
    list.push_back(std::move(entry));
    values.push_back(s.wptal);
  }
  ojson breaks = ojson::array();
  if (!values.empty()) {
    for (double p : {0.25, 0.5, 0.75}) breaks.push_back(percentile_linear(values, p));
  }
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["month"] = month.str();
  j["stations"] = std::move(list);
  j["wptal_breaks"] = std::move(breaks);
  j["warnings"] = batch.warnings;
  return json_response(j);
}

HttpResponse Service::zones() const {
  const auto& zones = engine_->snapshot().zones;
  std::optional<IncomeThresholds> thresholds;
  if (zones.size() >= 4) thresholds = income_quartiles(zones);
  ojson list = ojson::array();
  for (const Zone& z : zones) {
    ojson ring = ojson::array();
    for (const GeoPoint& p : z.ring) ring.push_back(point_json(p));
    list.push_back({{"zone_id", z.zone_id},
                    {"coordinates", std::move(ring)},
                    {"pop_white", z.pop_white},
                    {"pop_black", z.pop_black},
                    {"pop_asian", z.pop_asian},
                    {"pop_hispanic", z.pop_hispanic},
                    {"median_income", z.median_income},
                    {"pop_density", z.pop_density},
                    {"ethnicity", predominant_ethnicity(z)},
                    {"income_group", thresholds ? ojson(thresholds->classify(z.median_income)) : ojson(nullptr)}});
  }
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["zones"] = std::move(list);
  return json_response(j);
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::lock_guard lock(table_mutex_);
  const auto it = scenarios_.find(id);
  if (it == scenarios_.end()) throw Error(ErrorCode::NotFound, fmt::format("unknown scenario '{}'", id));
  return it->second;
}

namespace {

ojson scenario_json(const Scenario& s) {
  ojson added = ojson::array();
  for (const auto& [id, p] : s.added_candidates) added.push_back({{"candidate_id", id}, {"coordinates", point_json(p)}});
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["scenario_id"] = s.scenario_id;
  j["month"] = s.month.str();
  j["added_candidates"] = std::move(added);
  j["removed_station_ids"] = s.removed_station_ids;
  return j;
}

}  // namespace

HttpResponse Service::create_scenario(std::string_view body) {
  const ojson req = parse_body(body);
  const Month month = req.contains("month") ? Month::parse(req.at("month").get<std::string>()) : default_month_;
  std::optional<std::string> requested;
  if (req.contains("scenario_id")) {
    requested = req.at("scenario_id").get<std::string>();
    if (requested->empty() || requested->find('/') != std::string::npos) {
      throw InvalidArgument("scenario_id must be non-empty and contain no '/'");
    }
  }
  std::lock_guard lock(table_mutex_);
  if (requested) {
    const auto it = scenarios_.find(*requested);
    if (it != scenarios_.end()) {
      std::lock_guard entry_lock(it->second->mutex);
      if (it->second->scenario.month != month) {
        throw Error(ErrorCode::Capacity, fmt::format("scenario '{}' exists with a different month", *requested));
      }
      return json_response(scenario_json(it->second->scenario));
    }
  }
  if (scenarios_.size() >= capacity_) {
    throw Error(ErrorCode::Capacity, fmt::format("scenario table is full ({} scenarios)", capacity_));
  }
  auto entry = std::make_shared<Entry>();
  entry->scenario.month = month;
  if (requested) {
    entry->scenario.scenario_id = *requested;
  } else {
    do {
      entry->scenario.scenario_id = fmt::format("sc{:04d}", next_id_++);
    } while (scenarios_.count(entry->scenario.scenario_id));
  }
  scenarios_[entry->scenario.scenario_id] = entry;
  return json_response(scenario_json(entry->scenario), 201);
}

HttpResponse Service::update_candidates(const std::string& id, std::string_view body) {
  const ojson req = parse_body(body);
  std::vector<GeoPoint> add;
  std::vector<std::string> remove;
  if (req.contains("add")) {
    for (const ojson& p : req.at("add")) add.push_back(point_from_json(p));
  }
  if (req.contains("remove")) {
    for (const ojson& r : req.at("remove")) remove.push_back(r.get<std::string>());
  }
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  Scenario& s = entry->scenario;
  for (const GeoPoint& p : add) s.added_candidates.emplace(pin_id_for(p), p);
  for (const std::string& r : remove) {
    if (s.added_candidates.erase(r) == 0) s.removed_station_ids.insert(r);
  }
  entry->evaluation.reset();
  return json_response(scenario_json(s));
}

HttpResponse Service::evaluate(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  if (!entry->evaluation) entry->evaluation = dump_json(evaluate_whatif(entry->scenario, *engine_));
  return HttpResponse{200, "application/json", *entry->evaluation};
}

HttpResponse Service::delete_scenario(const std::string& id) {
  std::lock_guard lock(table_mutex_);
  if (scenarios_.erase(id) == 0) throw Error(ErrorCode::NotFound, fmt::format("unknown scenario '{}'", id));
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["deleted"] = id;
  return json_response(j);
}

HttpResponse Service::recommend(std::string_view body) const {
  const ojson req = parse_body(body);
  if (!req.contains("n") || !req.at("n").is_number_integer()) throw InvalidArgument("body must contain integer 'n'");
  const Month month = req.contains("month") ? Month::parse(req.at("month").get<std::string>()) : default_month_;
  return HttpResponse{200, "application/json", engine_->recommend_json(month, req.at("n").get<int>())};
}

}  // namespace bikeaccess
