#include "crowd/scenario.hpp"

#include <cmath>
#include <numbers>

#include "crowd/geometry.hpp"

namespace crowd {

namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

Real wrap_angle(Real a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;  // a + 2pi can round up to exactly 2pi
}

// Chamber center and the direction from it to the exit, in the scenario's
// physical frame.
Vec2 chamber_center(const ScenarioSpec& s) {
  if (s.shape == ChamberShape::Square)
    return Vec2(s.diameter_or_side_mm / 2.0, s.diameter_or_side_mm / 2.0);
  return Vec2::Zero();
}

Real exit_bearing(const ScenarioSpec& s) {
  return s.shape == ChamberShape::Square ? std::numbers::pi / 4.0 : 0.0;
}

}  // namespace

Real ScenarioSpec::characteristic_length_mm() const {
  // D is the largest distance coverable inside the chamber: the diameter for
  // the circular chambers, the diagonal for the square one.
  if (shape == ChamberShape::Square) return diameter_or_side_mm * std::numbers::sqrt2;
  return diameter_or_side_mm;
}

ScenarioSpec scenario_preset(std::string_view name) {
  ScenarioSpec s;
  if (name == "circle") {
    s.name = "circle";
    s.shape = ChamberShape::Circle;
    s.diameter_or_side_mm = 35;
  } else if (name == "circle-column") {
    s.name = "circle-column";
    s.shape = ChamberShape::CircleWithColumn;
    s.diameter_or_side_mm = 35;
    // One crescent holds all the ants here, so it is wider than the
    // two-group layouts. The outer radius clears the column so the region
    // stays connected around it.
    s.layout.crescent_inner_mm = 5;
    s.layout.crescent_outer_mm = 16.5;
    s.layout.crescent_half_angle_deg = 115;
  } else if (name == "square") {
    s.name = "square";
    s.shape = ChamberShape::Square;
    s.diameter_or_side_mm = 31;
  } else {
    throw ConfigError("unknown scenario preset: " + std::string(name));
  }
  return s;
}

Nondim nondimensionalize(const ScenarioSpec& spec, Real dt_s) {
  if (spec.max_speed_mm_s <= 0 || spec.diameter_or_side_mm <= 0)
    throw ConfigError("nondimensionalize: constants must be positive");
  Nondim n;
  n.ref_time_s = spec.ref_time_s();
  n.dx = spec.dx_mm / spec.characteristic_length_mm();
  n.dy = spec.dy_mm / spec.characteristic_length_mm();
  n.dt = dt_s / n.ref_time_s;
  return n;
}

DistributionField initial_state(const ScenarioSpec& spec, const GeometryGrid& grid) {
  const Vec2 center = chamber_center(spec);
  const Real bearing = exit_bearing(spec);
  const Real d_ref = spec.characteristic_length_mm();
  const Real half_open = spec.layout.crescent_half_angle_deg * std::numbers::pi / 180.0;
  const Vec2 disk_center =
      center - spec.layout.disk_offset_mm * Vec2(std::cos(bearing), std::sin(bearing));
  const bool has_disk = spec.shape != ChamberShape::CircleWithColumn;

  std::vector<Index> cells;
  std::vector<Index> dir_of;
  for (Index c : grid.walkable_cells) {
    const Vec2 p = grid.center(c) * d_ref;  // back to mm
    const Vec2 rel = p - center;
    bool in_disk = has_disk && (p - disk_center).norm() <= spec.layout.disk_radius_mm;
    const Real r = rel.norm();
    bool in_crescent = r >= spec.layout.crescent_inner_mm &&
                       r <= spec.layout.crescent_outer_mm &&
                       angular_distance(wrap_angle(std::atan2(rel.y(), rel.x())), bearing) <=
                           half_open;
    if (!in_disk && !in_crescent) continue;

    Index dir = 0;
    switch (spec.shape) {
      case ChamberShape::Circle:
        dir = in_disk ? 0 : grid.dirs.n_d / 2;  // theta_1 toward the exit, theta_5 away
        break;
      case ChamberShape::CircleWithColumn:
        dir = 0;
        break;
      case ChamberShape::Square:
        // Directions split by quadrant: theta_6 next to the exit corner,
        // theta_2 everywhere else.
        dir = (rel.x() > 0 && rel.y() > 0) ? 5 : 1;
        break;
    }
    cells.push_back(c);
    dir_of.push_back(grid.dirs.wrap(dir));
  }
  if (cells.empty()) throw ConfigError("initial_state: initial regions contain no cells");

  const Real cell_area_mm2 = spec.dx_mm * spec.dy_mm;
  const Real capacity =
      spec.max_density_per_mm2 * cell_area_mm2 * static_cast<Real>(cells.size());
  const Real rho_hat = spec.ant_count / capacity;
  if (rho_hat > 1.0 + kDensityTol)
    throw ConfigError("initial_state: too many ants for the initial regions (rho > 1)");

  DistributionField f = DistributionField::Zero(grid.dirs.n_d, grid.n_cells());
  for (std::size_t idx = 0; idx < cells.size(); ++idx) f(dir_of[idx], cells[idx]) = rho_hat;
  return f;
}

ObservationSeries make_synthetic(const ScenarioSpec& spec, const GeometryGrid& grid,
                                 const KineticCache& cache, Real eps_true, const TimeGrid& time,
                                 const SolverOptions& options, ForwardTrajectory* trajectory,
                                 Real quantize_step) {
  if (eps_true < 0 || eps_true > 1)
    throw ConfigError("make_synthetic: eps_true outside [0, 1]");
  if (quantize_step < 0) throw ConfigError("make_synthetic: quantize step must be >= 0");
  const DistributionField f0 = initial_state(spec, grid);
  const StressField eps = StressField::Constant(grid.n_cells(), eps_true);
  ForwardTrajectory traj = run_forward(
      f0, [&](Index) { return eps; }, grid, cache, time, options);

  ObservationSeries obs;
  obs.stride_m = time.data_stride;
  obs.frame_dt = time.dt * static_cast<Real>(time.data_stride);
  obs.frames.assign(traj.snapshots.begin() + 1, traj.snapshots.end());
  if (quantize_step > 0) {
    for (auto& [t, rho] : obs.frames)
      rho = (rho / quantize_step).round() * quantize_step;
  }
  if (trajectory) *trajectory = std::move(traj);
  return obs;
}

}  // namespace crowd
