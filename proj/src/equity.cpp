#include "bikeaccess/equity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "bikeaccess/error.hpp"

namespace bikeaccess {

std::string_view to_string(GroupVariable v) { return v == GroupVariable::ethnicity ? "ethnicity" : "income"; }

std::span<const std::string_view> labels_of(GroupVariable v) {
  return v == GroupVariable::ethnicity ? std::span<const std::string_view>(kEthnicityLabels)
                                       : std::span<const std::string_view>(kIncomeLabels);
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("percentile outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::string_view IncomeThresholds::classify(double income) const {
  if (income <= q25) return "low";
  if (income <= q50) return "med_low";
  if (income <= q75) return "med_high";
  return "high";
}

IncomeThresholds income_quartiles(std::span<const Zone> zones) {
  if (zones.size() < 4) {
    throw InvalidArgument(fmt::format("income quartiles need at least 4 zones, got {}", zones.size()));
  }
  std::vector<double> incomes;
  incomes.reserve(zones.size());
  for (const Zone& z : zones) incomes.push_back(z.median_income);
  return IncomeThresholds{percentile_linear(incomes, 0.25), percentile_linear(incomes, 0.50),
                          percentile_linear(incomes, 0.75)};
}

std::string_view predominant_ethnicity(const Zone& zone) {
  // Alphabetical scan with a strict comparison resolves ties to the first label.
  const std::array<std::pair<std::string_view, double>, 4> counts = {
      {{"Asian", zone.pop_asian}, {"Black", zone.pop_black}, {"Hispanic", zone.pop_hispanic}, {"White", zone.pop_white}}};
  auto best = counts[0];
  for (const auto& c : counts) {
    if (c.second > best.second) best = c;
  }
  return best.first;
}

std::optional<GroupKey> assign_group(const GeoPoint& location, std::span<const Zone> zones, GroupVariable variable,
                                     const std::optional<IncomeThresholds>& thresholds) {
  const Zone* zone = zone_of(location, zones);
  if (!zone) return std::nullopt;
  if (variable == GroupVariable::ethnicity) return GroupKey{variable, std::string(predominant_ethnicity(*zone))};
  if (!thresholds) return std::nullopt;
  return GroupKey{variable, std::string(thresholds->classify(zone->median_income))};
}

std::optional<GroupKey> assign_group(const GeoPoint& location, std::span<const Zone> zones, GroupVariable variable) {
  std::optional<IncomeThresholds> thresholds;
  if (variable == GroupVariable::income && zones.size() >= 4) thresholds = income_quartiles(zones);
  return assign_group(location, zones, variable, thresholds);
}

std::optional<double> gini(std::span<const GroupStats> groups) {
  std::vector<std::pair<double, double>> occupied;  // (mean, weight)
  for (const GroupStats& g : groups) {
    if (g.w < 0.0 || !std::isfinite(g.w) || !std::isfinite(g.m)) throw InvalidArgument("invalid group statistics");
    if (g.w > 0.0) occupied.emplace_back(g.m, g.w);
  }
  if (occupied.empty()) return std::nullopt;
  double total_w = 0.0;
  double weighted = 0.0;
  for (const auto& [m, w] : occupied) {
    total_w += w;
    weighted += w * m;
  }
  const double mu = weighted / total_w;
  if (!(mu > 0.0)) return std::nullopt;

  // With means sorted ascending, sum_ij w_i w_j |m_i - m_j| equals
  // 2 sum_j w_j (m_j * W_<j - S_<j), using prefix weight and weight*mean sums.
  std::sort(occupied.begin(), occupied.end());
  double prefix_w = 0.0;
  double prefix_wm = 0.0;
  double pair_sum = 0.0;
  for (const auto& [m, w] : occupied) {
    pair_sum += w * (m * prefix_w - prefix_wm);
    prefix_w += w;
    prefix_wm += w * m;
  }
  return (2.0 * pair_sum) / (2.0 * total_w * total_w * mu);
}

// ---------------------------------------------------------------------------

EquityAccumulator::EquityAccumulator(const CitySnapshot& snap) : snap_(&snap) {
  try {
    thresholds_ = income_quartiles(snap.zones);
  } catch (const InvalidArgument& e) {
    income_diagnostic_ = e.what();
  }
}

void EquityAccumulator::add(const AccessScore& score) {
  const Zone* zone = zone_of(score.location, snap_->zones);
  if (!zone) {
    ++unassigned_;
    warnings_.push_back(fmt::format("station '{}' lies outside all zones; excluded from equity statistics",
                                    score.station_id));
    return;
  }
  auto index_of = [](std::span<const std::string_view> labels, std::string_view label) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
  };
  const std::size_t e = index_of(kEthnicityLabels, predominant_ethnicity(*zone));
  count_[0][e] += 1.0;
  sum_[0][e] += score.wptal;
  if (thresholds_) {
    const std::size_t i = index_of(kIncomeLabels, thresholds_->classify(zone->median_income));
    count_[1][i] += 1.0;
    sum_[1][i] += score.wptal;
  }
}

EquityReport EquityAccumulator::report() const {
  EquityReport out;
  out.unassigned = unassigned_;
  out.warnings = warnings_;
  for (std::size_t v = 0; v < 2; ++v) {
    VariableReport& r = out.variables[v];
    r.variable = static_cast<GroupVariable>(v);
    const auto labels = labels_of(r.variable);
    double weighted = 0.0;
    for (std::size_t g = 0; g < labels.size(); ++g) {
      const double w = count_[v][g];
      r.groups.push_back(GroupStats{std::string(labels[g]), w, w > 0.0 ? sum_[v][g] / w : 0.0});
      r.total_w += w;
      weighted += sum_[v][g];
    }
    r.mu = r.total_w > 0.0 ? weighted / r.total_w : 0.0;
    if (r.variable == GroupVariable::income && !thresholds_) {
      r.diagnostic = income_diagnostic_;
      continue;
    }
    r.gini = gini(r.groups);
    if (!r.gini) {
      r.diagnostic = r.total_w > 0.0 ? "undefined: all stations have zero accessibility"
                                     : "undefined: no stations assigned to groups";
    }
  }
  return out;
}

EquityReport equity_report(std::span<const AccessScore> scores, const CitySnapshot& snap) {
  EquityAccumulator acc(snap);
  for (const AccessScore& s : scores) acc.add(s);
  return acc.report();
}

nlohmann::ordered_json to_json(const VariableReport& report) {
  nlohmann::ordered_json j;
  j["variable"] = std::string(to_string(report.variable));
  j["groups"] = nlohmann::ordered_json::array();
  for (const GroupStats& g : report.groups) {
    j["groups"].push_back({{"label", g.label}, {"w", g.w}, {"mean_wptal", g.m}});
  }
  j["W"] = report.total_w;
  j["mu"] = report.mu;
  j["gini"] = report.gini ? nlohmann::ordered_json(*report.gini) : nlohmann::ordered_json(nullptr);
  if (!report.diagnostic.empty()) j["diagnostic"] = report.diagnostic;
  return j;
}

nlohmann::ordered_json to_json(const EquityReport& report) {
  nlohmann::ordered_json j;
  j["variables"] = nlohmann::ordered_json::array();
  for (const auto& v : report.variables) j["variables"].push_back(to_json(v));
  j["unassigned"] = report.unassigned;
  return j;
}

}  // namespace bikeaccess
