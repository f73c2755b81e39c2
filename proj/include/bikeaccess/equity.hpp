#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bikeaccess/accessibility.hpp"
#include "bikeaccess/geodata.hpp"

namespace bikeaccess {

enum class GroupVariable { ethnicity, income };

inline constexpr std::array<std::string_view, 4> kEthnicityLabels = {"White", "Black", "Asian", "Hispanic"};
inline constexpr std::array<std::string_view, 4> kIncomeLabels = {"high", "med_high", "med_low", "low"};

std::string_view to_string(GroupVariable v);
std::span<const std::string_view> labels_of(GroupVariable v);

struct GroupKey {
  GroupVariable variable = GroupVariable::ethnicity;
  std::string label;

  friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

// Linear-interpolation percentile (p in [0, 1]) of an unsorted sample.
double percentile_linear(std::vector<double> values, double p);

struct IncomeThresholds {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;

  // <= q25 low, <= q50 med_low, <= q75 med_high, else high.
  std::string_view classify(double income) const;
};

// Quartiles of zone median incomes. Throws InvalidArgument for fewer than 4 zones.
IncomeThresholds income_quartiles(std::span<const Zone> zones);

// Largest of the four population counts; ties go to the alphabetically first label.
std::string_view predominant_ethnicity(const Zone& zone);

// nullopt when the point lies outside every zone (or, for income, when
// thresholds are unavailable).
std::optional<GroupKey> assign_group(const GeoPoint& location, std::span<const Zone> zones, GroupVariable variable,
                                     const std::optional<IncomeThresholds>& thresholds);
std::optional<GroupKey> assign_group(const GeoPoint& location, std::span<const Zone> zones, GroupVariable variable);

struct GroupStats {
  std::string label;
  double w = 0.0;  // station count
  double m = 0.0;  // mean wPTAL
};

// sum_ij w_i w_j |m_i - m_j| / (2 W^2 mu) over groups with w > 0.
// nullopt when no group is occupied or the weighted mean is zero.
std::optional<double> gini(std::span<const GroupStats> groups);

struct VariableReport {
  GroupVariable variable = GroupVariable::ethnicity;
  std::vector<GroupStats> groups;  // every label of the variable, fixed order
  double total_w = 0.0;
  double mu = 0.0;
  std::optional<double> gini;
  std::string diagnostic;  // set when gini is undefined
};

struct EquityReport {
  std::array<VariableReport, 2> variables;  // ethnicity, income
  int unassigned = 0;
  std::vector<std::string> warnings;

  const VariableReport& of(GroupVariable v) const { return variables[static_cast<std::size_t>(v)]; }
};

// Accumulates per-group sums so reports can be extended station by station.
class EquityAccumulator {
 public:
  explicit EquityAccumulator(const CitySnapshot& snap);

  void add(const AccessScore& score);
  EquityReport report() const;

 private:
  const CitySnapshot* snap_;
  std::optional<IncomeThresholds> thresholds_;
  std::string income_diagnostic_;
  std::array<std::array<double, 4>, 2> count_{};
  std::array<std::array<double, 4>, 2> sum_{};
  int unassigned_ = 0;
  std::vector<std::string> warnings_;
};

EquityReport equity_report(std::span<const AccessScore> scores, const CitySnapshot& snap);

nlohmann::ordered_json to_json(const VariableReport& report);
nlohmann::ordered_json to_json(const EquityReport& report);

}  // namespace bikeaccess
