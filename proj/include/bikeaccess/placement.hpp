#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bikeaccess/accessibility.hpp"
#include "bikeaccess/equity.hpp"
#include "bikeaccess/geodata.hpp"

namespace bikeaccess {

enum class EquityFilter { income_or_minority, income_and_minority };

struct PlacementParams {
  double min_spacing_m = 305.0;
  std::vector<RoadClass> walkable_classes = {RoadClass::residential, RoadClass::living_street, RoadClass::tertiary,
                                             RoadClass::secondary};
  EquityFilter equity_filter = EquityFilter::income_or_minority;

  void validate() const;
  bool walkable(RoadClass cls) const;
};

struct Candidate {
  std::string candidate_id;
  NodeId node = 0;
  GeoPoint location;
};

struct ScoredCandidate {
  std::string candidate_id;
  NodeId node = 0;
  AccessScore score;  // station_id == candidate_id
};

// Zones whose median income is below the citywide median of zone incomes
// and/or whose combined Black, Asian and Hispanic population exceeds White.
std::vector<const Zone*> qualifying_zones(std::span<const Zone> zones, EquityFilter filter);

std::string candidate_id_for(NodeId node);

// Nodes on walkable edges inside a qualifying zone and at least min_spacing_m
// (haversine) from every existing or cold-start station. Sorted by node id.
std::vector<Candidate> candidate_sites(const CitySnapshot& snap, const PlacementParams& params);

struct CandidateScores {
  std::vector<ScoredCandidate> scored;  // candidate order preserved
  std::vector<std::string> warnings;
};

// Scores each candidate as a cold-start station opening in `month`.
CandidateScores score_candidates(std::span<const Candidate> candidates, const CitySnapshot& snap, const Month& month,
                                 const DemandPredictor& demand, const AccessParams& access = {});

// Greedy by wPTAL (ties to the smaller id), keeping every pick at least
// min_spacing_m from earlier picks. Output is in selection order.
std::vector<ScoredCandidate> recommend(std::span<const ScoredCandidate> scored, int n, const PlacementParams& params);

struct CurvePoint {
  int requested = 0;
  int used = 0;
  EquityReport report;
};

// Equity over base plus the first n recommendations, for each n in
// `increments` (must be non-decreasing and non-negative).
std::vector<CurvePoint> equity_curve(std::span<const AccessScore> base, std::span<const ScoredCandidate> recommendations,
                                     std::span<const int> increments, const CitySnapshot& snap);

std::string recommendations_to_csv(std::span<const ScoredCandidate> selection);
nlohmann::ordered_json recommendations_to_json(std::span<const ScoredCandidate> selection);
nlohmann::ordered_json curve_to_json(std::span<const CurvePoint> curve);

// Reads rank,candidate_id,lon,lat,demand,ptal,wptal rows back into scores.
std::vector<AccessScore> parse_recommendations_csv(std::string_view text, const Month& month,
                                                   std::string_view name = "recommendations.csv");

}  // namespace bikeaccess
