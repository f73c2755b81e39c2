#include "bikeaccess/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"
#include "bikeaccess/geo.hpp"

namespace bikeaccess::synthetic {

namespace {

struct Frame {
  double lon0;
  double lat0;
  double dlon;
  double dlat;

  GeoPoint at(double i, double j) const { return GeoPoint{lon0 + i * dlon, lat0 + j * dlat}; }
};

Frame make_frame(double spacing_m) {
  const double lat0 = 40.70;
  const double dlat = spacing_m / (kEarthRadiusM * std::numbers::pi / 180.0);
  return Frame{-73.95, lat0, dlat / std::cos(lat0 * std::numbers::pi / 180.0), dlat};
}

RoadNetwork grid_network(const Frame& f, int size, auto road_class_of_row, auto road_class_of_col) {
  std::vector<RoadLine> lines;
  for (int j = 0; j < size; ++j) {
    RoadLine line;
    line.road_class = road_class_of_row(j);
    line.bike_lane = j % 5 == 0;
    for (int i = 0; i < size; ++i) line.points.push_back(f.at(i, j));
    lines.push_back(std::move(line));
  }
  for (int i = 0; i < size; ++i) {
    RoadLine line;
    line.road_class = road_class_of_col(i);
    for (int j = 0; j < size; ++j) line.points.push_back(f.at(i, j));
    lines.push_back(std::move(line));
  }
  return build_network(lines);
}

Zone strip_zone(const Frame& f, std::string id, double i0, double i1, double j0, double j1) {
  Zone z;
  z.zone_id = std::move(id);
  z.ring = {f.at(i0, j0), f.at(i1, j0), f.at(i1, j1), f.at(i0, j1), f.at(i0, j0)};
  return z;
}

std::vector<double> arrivals_every(double headway_min) {
  std::vector<double> out;
  for (double t = 0.0; t < 1440.0; t += headway_min) out.push_back(t);
  return out;
}

void add_subway(SnapshotParts& parts, const Frame& f, const std::string& id, double i, double j, double headway) {
  parts.entrances.push_back(SubwayEntrance{id + "-a", id, f.at(i, j)});
  parts.entrances.push_back(SubwayEntrance{id + "-b", id, f.at(i + 0.2, j + 0.1)});
  parts.schedules.push_back(ServiceSchedule{id, arrivals_every(headway)});
}

void add_pois(SnapshotParts& parts, const Frame& f, int size, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(0.0, size - 1.0);
  std::uniform_int_distribution<int> cat(0, static_cast<int>(kPoiCategoryCount) - 1);
  for (int k = 0; k < count; ++k) {
    const double i = coord(rng);
    const double j = coord(rng);
    parts.pois.push_back(Poi{fmt::format("p{:04d}", k), f.at(i, j), static_cast<PoiCategory>(cat(rng))});
  }
}

}  // namespace

Month grid_month() { return Month{2024, 6}; }

SnapshotParts equity_grid_city(const GridCityOptions& options) {
  if (options.size < 12) throw InvalidArgument("grid city needs at least 12 nodes per side");
  const int n = options.size;
  const int half = n / 2;
  const Frame f = make_frame(options.spacing_m);
  std::mt19937_64 rng(options.seed);

  SnapshotParts parts;
  parts.network = grid_network(
      f, n, [&](int j) { return j == half ? RoadClass::secondary : RoadClass::residential; },
      [&](int i) { return i == n - 1 ? RoadClass::motorway : RoadClass::residential; });

  const double lo = -0.5;
  const double hi = n - 0.5;
  const double q = n / 4.0;
  struct Demo {
    double white, black, asian, hispanic, income, density;
  };
  const Demo demos[4] = {{800, 100, 80, 20, 120000, 9000},
                         {700, 100, 100, 100, 100000, 11000},
                         {200, 150, 50, 600, 45000, 14000},
                         {100, 700, 50, 150, 30000, 16000}};
  for (int z = 0; z < 4; ++z) {
    Zone zone = strip_zone(f, fmt::format("z{}", z + 1), lo + z * q, lo + (z + 1) * q, lo, hi);
    zone.pop_white = demos[z].white;
    zone.pop_black = demos[z].black;
    zone.pop_asian = demos[z].asian;
    zone.pop_hispanic = demos[z].hispanic;
    zone.median_income = demos[z].income;
    zone.pop_density = demos[z].density;
    parts.zones.push_back(std::move(zone));
  }

  const int a = n / 10;
  const int b = half - a - 1;
  add_subway(parts, f, "sub-w1", a, a * 2, 5.0);
  add_subway(parts, f, "sub-w2", a, n - 1 - a * 2, 5.0);
  add_subway(parts, f, "sub-w3", b, a * 2, 5.0);
  add_subway(parts, f, "sub-w4", b, n - 1 - a * 2, 5.0);
  // East stations sit more than 500 m from every cold-start site.
  add_subway(parts, f, "sub-e1", half + 3, half + 3, 10.0);
  add_subway(parts, f, "sub-e2", half + 8, half - 3, 10.0);

  std::normal_distribution<double> noise(0.0, 2.0);
  int k = 0;
  for (int j = 1; j < n; j += 6) {
    for (int i = 1; i < n; i += 6) {
      Station s;
      s.station_id = fmt::format("e{:03d}", k++);
      s.location = f.at(i, j);
      s.status = StationStatus::existing;
      s.open_month = Month{2021, 1};
      const double level = i < half ? 60.0 : 25.0;
      for (int m = 1; m <= 12; ++m) {
        s.observed_demand[Month{2022, m}] = std::max(0.0, level + 1.5 * m + noise(rng));
      }
      parts.stations.push_back(std::move(s));
    }
  }
  k = 0;
  for (int j = 4; j < n; j += 6) {
    for (int i = 4; i < n; i += 6) {
      Station s;
      s.station_id = fmt::format("s{:03d}", k++);
      s.location = f.at(i, j);
      s.status = StationStatus::cold_start;
      s.open_month = grid_month();
      parts.stations.push_back(std::move(s));
    }
  }
  add_pois(parts, f, n, 4 * n, rng);
  return parts;
}

SnapshotParts linear_demand_city(int stations, int months, std::uint64_t seed) {
  if (stations < 8 || months < 1) throw InvalidArgument("linear demand city needs >= 8 stations and >= 1 month");
  const int n = 15;
  const Frame f = make_frame(200.0);
  std::mt19937_64 rng(seed);

  SnapshotParts parts;
  parts.network = grid_network(
      f, n, [](int j) { return j % 7 == 0 ? RoadClass::tertiary : RoadClass::residential; },
      [](int i) { return i % 7 == 0 ? RoadClass::secondary : RoadClass::residential; });
  const double lo = -0.5;
  const double mid = (n - 1) / 2.0;
  const double hi = n - 0.5;
  const double incomes[4] = {90000, 60000, 40000, 75000};
  int z = 0;
  for (auto [i0, i1] : {std::pair{lo, mid}, std::pair{mid, hi}}) {
    for (auto [j0, j1] : {std::pair{lo, mid}, std::pair{mid, hi}}) {
      Zone zone = strip_zone(f, fmt::format("q{}", z + 1), i0, i1, j0, j1);
      zone.pop_white = 400 + 100 * z;
      zone.pop_black = 300 - 50 * z;
      zone.pop_asian = 100;
      zone.pop_hispanic = 200;
      zone.median_income = incomes[z];
      zone.pop_density = 8000 + 1000 * z;
      parts.zones.push_back(std::move(zone));
      ++z;
    }
  }
  add_subway(parts, f, "sub-1", 4, 4, 6.0);
  add_subway(parts, f, "sub-2", 10, 9, 10.0);

  std::uniform_real_distribution<double> coord(0.0, n - 1.0);
  std::uniform_int_distribution<int> open_offset(0, 35);
  std::normal_distribution<double> noise(0.0, 0.1);
  const Month first_label{2022, 1};
  for (int k = 0; k < stations; ++k) {
    Station s;
    s.station_id = fmt::format("st{:03d}", k);
    s.location = f.at(coord(rng), coord(rng));
    s.status = StationStatus::existing;
    s.open_month = Month::from_index(Month{2019, 1}.index() + open_offset(rng));
    for (int m = 0; m < months; ++m) {
      const Month month = Month::from_index(first_label.index() + m);
      const double age = month.index() - s.open_month->index();
      s.observed_demand[month] = 3.0 * age + noise(rng);
    }
    parts.stations.push_back(std::move(s));
  }
  add_pois(parts, f, n, 40, rng);
  return parts;
}

}  // namespace bikeaccess::synthetic
