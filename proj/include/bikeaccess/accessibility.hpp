#pragma once

#include <span>
#include <string>
#include <vector>

#include "bikeaccess/geodata.hpp"

namespace bikeaccess {

// AM-peak accessibility constants. window_end - window_start is the
// observation period T in minutes.
struct AccessParams {
  double window_start = 450.0;  // 07:30
  double window_end = 570.0;    // 09:30
  double reliability_buffer = 0.75;
  double edf_numerator = 30.0;
  double secondary_weight = 0.5;
  double entrance_radius = 500.0;

  double period() const { return window_end - window_start; }
  // Throws InvalidArgument if any constant is non-positive or the window is empty.
  void validate() const;
};

// Equivalent doorstep frequency of one subway station; 0 when N_j == 0.
double edf(double t_bike_min, int trains_in_window, const AccessParams& params = {});

// Best EDF plus secondary_weight times the sum of the rest.
double ptal(std::span<const double> edfs, double secondary_weight = 0.5);

double wptal(double ptal_value, double demand);

struct SubwayEdf {
  std::string subway_station_id;
  double t_bike_min = 0.0;  // fastest entrance of that station
  int trains = 0;
  double edf = 0.0;
};

struct StationAccess {
  std::vector<SubwayEdf> edfs;  // subway_station_id order
  double ptal = 0.0;
  int n_entrances = 0;
  std::vector<std::string> warnings;
};

// One EDF per parent subway station, using the minimum bike time over its
// entrances inside the radius.
StationAccess station_access(const GeoPoint& location, const CitySnapshot& snap, const AccessParams& params = {});

// Source of predicted monthly trips. Implementations throw on failure.
class DemandPredictor {
 public:
  virtual ~DemandPredictor() = default;
  virtual double predict(const Station& station, const Month& month) const = 0;
};

// Predicts the same value everywhere; with 1.0, wPTAL equals PTAL.
class ConstantDemand final : public DemandPredictor {
 public:
  explicit ConstantDemand(double trips) : trips_(trips) {}
  double predict(const Station&, const Month&) const override { return trips_; }

 private:
  double trips_;
};

struct AccessScore {
  std::string station_id;
  Month month;
  GeoPoint location;
  std::vector<SubwayEdf> edfs;
  double ptal = 0.0;
  double demand = 0.0;
  double wptal = 0.0;
  int n_entrances = 0;
};

struct ScoreBatch {
  std::vector<AccessScore> scores;  // station_id order
  std::vector<std::string> warnings;
};

// Scores one station; predictor failures propagate.
AccessScore score_station(const Station& station, const Month& month, const CitySnapshot& snap,
                          const DemandPredictor& demand, const AccessParams& params = {});

// Scores every cold-start and candidate station. A station whose prediction
// fails is skipped with a warning; the batch never aborts.
ScoreBatch score_all(const CitySnapshot& snap, const Month& month, const DemandPredictor& demand,
                     const AccessParams& params = {});
// Same, over an explicit station list.
ScoreBatch score_stations(std::span<const Station> stations, const CitySnapshot& snap, const Month& month,
                          const DemandPredictor& demand, const AccessParams& params = {});

// station_id,month,ptal,demand,wptal,n_entrances with 6-decimal fixed values.
std::string scores_to_csv(std::span<const AccessScore> scores);

}  // namespace bikeaccess
