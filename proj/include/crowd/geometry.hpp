#pragma once

#include <cstdint>
#include <vector>

#include "crowd/kinetic.hpp"
#include "crowd/types.hpp"

namespace crowd {

struct ScenarioSpec;

struct GridSpec {
  Real dx = 0;  // dimensionless cell widths
  Real dy = 0;
  Index nx = 0;
  Index ny = 0;
  Vec2 origin = Vec2::Zero();  // dimensionless center of cell (0, 0)
  Real characteristic_length_mm = 0;  // D
  Real max_speed_mm_s = 0;            // V_M
  Real max_density_per_mm2 = 0;       // rho_M
  Real interaction_rate = 1;          // dimensionless decision rate, per unit time

  Real ref_time_s() const { return characteristic_length_mm / max_speed_mm_s; }
  Real cell_area() const { return dx * dy; }
};

enum class CellKind : std::uint8_t { Walkable, Wall, Obstacle, Exit };

// Static per-scenario geometry: cell classification plus the exit/wall
// distance fields and preferred angles the transition tables consume.
// Immutable after build_geometry; distances are nondimensionalized by D and
// clamped to [0, 1].
struct GeometryGrid {
  GridSpec spec;
  DirectionSet dirs;
  std::vector<CellKind> kinds;
  std::vector<Index> walkable_cells;
  ArrayX<Real> d_exit;        // per cell
  Eigen::Matrix2Xd u_exit;    // per cell
  ArrayXX<Real> d_wall;       // (direction, cell)
  ArrayXX<Real> u_wall_x;     // tangent at the collision point, exit-ward
  ArrayXX<Real> u_wall_y;
  ArrayXX<Real> theta_g;      // geometric preferred angle, in [0, 2pi)
  bool periodic = false;

  Index n_cells() const { return spec.nx * spec.ny; }
  Index cell_index(Index ix, Index iy) const { return iy * spec.nx + ix; }
  Index ix_of(Index cell) const { return cell % spec.nx; }
  Index iy_of(Index cell) const { return cell / spec.nx; }
  CellKind kind(Index cell) const { return kinds[static_cast<std::size_t>(cell)]; }
  bool is_walkable(Index cell) const { return kind(cell) == CellKind::Walkable; }
  Vec2 center(Index cell) const {
    return spec.origin + Vec2(spec.dx * static_cast<Real>(ix_of(cell)),
                              spec.dy * static_cast<Real>(iy_of(cell)));
  }
  Real walkable_area() const { return static_cast<Real>(walkable_cells.size()) * spec.cell_area(); }
};

// Exact ray cast against the continuous chamber boundary (circle/square plus
// optional column), in physical mm.
struct RayHit {
  Real distance_mm = 0;
  Vec2 tangent = Vec2::UnitX();  // oriented toward the exit
  bool through_exit = false;
};

RayHit cast_ray(const ScenarioSpec& scenario, const Vec2& point_mm, Real angle);

GeometryGrid build_geometry(const ScenarioSpec& scenario);

// Normalized (1-d_E) u_E + (1-d_W) u_W, falling back to the exit direction
// when the weighted sum degenerates.
Real preferred_angle(Real d_exit, const Vec2& u_exit, Real d_wall, const Vec2& u_wall);

Real geometric_preferred_angle(const GeometryGrid& grid, Index cell, Index h);

std::pair<Real, Vec2> wall_collision(const GeometryGrid& grid, Index cell, Index h);

// Rectangular all-walkable test fixture: either periodic or enclosed by a
// ring of wall cells. theta_g is set to the keep-direction choice so the
// geometry table reduces to the identity.
GeometryGrid make_test_box(Index nx_inner, Index ny_inner, Real dx, Real dy,
                           const DirectionSet& dirs, bool periodic);

}  // namespace crowd
