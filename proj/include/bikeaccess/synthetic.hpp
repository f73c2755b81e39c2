#pragma once

// Deterministic synthetic cities for demos and end-to-end checks.

#include <cstdint>

#include "bikeaccess/geodata.hpp"

namespace bikeaccess::synthetic {

struct GridCityOptions {
  int size = 20;            // nodes per side
  double spacing_m = 150.0;  // between adjacent nodes
  std::uint64_t seed = 7;
};

// Square street grid split into two halves. The west half is high income with
// four frequently served subway stations; the east half is low income with two
// less frequent stations that no cold-start site can reach. Four zones
// (vertical strips), existing stations with a year of observed demand, and
// cold-start stations opening in grid_month().
SnapshotParts equity_grid_city(const GridCityOptions& options = {});
Month grid_month();

// `stations` existing stations observed for `months` months, where trips
// equal 3 x station age in months plus Gaussian noise with sigma 0.1.
SnapshotParts linear_demand_city(int stations = 60, int months = 12, std::uint64_t seed = 11);

}  // namespace bikeaccess::synthetic
