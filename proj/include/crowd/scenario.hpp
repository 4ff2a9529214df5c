#pragma once

#include <string>
#include <string_view>

#include "crowd/inverse.hpp"
#include "crowd/types.hpp"

namespace crowd {

enum class ChamberShape { Circle, CircleWithColumn, Square };

// Initial group shapes in physical mm, relative to the chamber center.
// Defaults are sized so 200 ants fit comfortably below dimensionless
// density 1; the figures in the source experiments constrain them only
// loosely, so all of this is configurable.
struct InitialLayout {
  Real disk_radius_mm = 12;      // circular group
  Real disk_offset_mm = 8;       // distance of its center from the chamber
                                 // center, opposite the exit
  Real crescent_inner_mm = 8.5;  // annular-sector group facing the exit
  Real crescent_outer_mm = 16.5;
  Real crescent_half_angle_deg = 75;
};

struct ScenarioSpec {
  std::string name = "circle";
  ChamberShape shape = ChamberShape::Circle;
  Real diameter_or_side_mm = 35;
  Real exit_width_mm = 2.5;
  Real column_diameter_mm = 5;
  Real column_clearance_mm = 2;  // gap between column edge and the boundary
  Real ant_count = 200;
  Real dx_mm = 1;
  Real dy_mm = 1;
  Real max_speed_mm_s = 2;        // V_M
  Real max_density_per_mm2 = 0.5; // rho_M
  // How often an individual revises their walking direction. The balance law
  // is written per reference time T = D / V_M, so this enters the interaction
  // terms as the dimensionless factor decision_rate_hz * T; 1/T here recovers
  // interactions at unit rate, which is far too slow to steer a crowd around
  // obstacles within the experiments' ~20 s horizon.
  Real decision_rate_hz = 2.0;
  Index n_d = 8;
  InitialLayout layout;

  Real characteristic_length_mm() const;  // D
  Real ref_time_s() const { return characteristic_length_mm() / max_speed_mm_s; }
  bool has_column() const { return shape == ChamberShape::CircleWithColumn; }
};

// Built-in presets: "circle", "circle-column", "square".
ScenarioSpec scenario_preset(std::string_view name);

struct Nondim {
  Real dx = 0;
  Real dy = 0;
  Real dt = 0;
  Real ref_time_s = 0;
};

Nondim nondimensionalize(const ScenarioSpec& spec, Real dt_s);

// Places ant_count ants into the scenario's initial regions at a uniform
// dimensionless density, each region's mass assigned to its single initial
// direction.
DistributionField initial_state(const ScenarioSpec& spec, const GeometryGrid& grid);

// Twin-experiment data: run the forward model at a uniform constant stress
// level and keep the density frames. The full trajectory (occupancy and all)
// is available through the optional out parameter. quantize_step > 0 rounds
// the frames to that resolution, emulating coarse video-derived densities.
ObservationSeries make_synthetic(const ScenarioSpec& spec, const GeometryGrid& grid,
                                 const KineticCache& cache, Real eps_true, const TimeGrid& time,
                                 const SolverOptions& options = {},
                                 ForwardTrajectory* trajectory = nullptr,
                                 Real quantize_step = 0);

}  // namespace crowd
