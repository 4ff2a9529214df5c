#pragma once

#include <random>

#include "crowd/forward.hpp"
#include "crowd/geometry.hpp"
#include "crowd/scenario.hpp"

namespace crowd::testing {

inline const GeometryGrid& circle_grid() {
  static const GeometryGrid grid = build_geometry(scenario_preset("circle"));
  return grid;
}

inline const GeometryGrid& square_grid() {
  static const GeometryGrid grid = build_geometry(scenario_preset("square"));
  return grid;
}

inline const GeometryGrid& column_grid() {
  static const GeometryGrid grid = build_geometry(scenario_preset("circle-column"));
  return grid;
}

inline const KineticCache& circle_cache() {
  static const KineticCache cache = build_kinetic_cache(circle_grid());
  return cache;
}

// Random admissible state with rho <= rho_cap on every walkable cell.
inline DistributionField random_state(const GeometryGrid& grid, std::mt19937& rng,
                                      Real rho_cap = 0.95) {
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  DistributionField f = DistributionField::Zero(grid.dirs.n_d, grid.n_cells());
  for (Index c : grid.walkable_cells) {
    Real sum = 0;
    for (Index i = 0; i < grid.dirs.n_d; ++i) {
      f(i, c) = unit(rng);
      sum += f(i, c);
    }
    const Real target = rho_cap * unit(rng);
    if (sum > 0) f.col(c) *= target / sum;
  }
  return f;
}

}  // namespace crowd::testing
