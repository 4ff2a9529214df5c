#include "crowd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "crowd/scenario.hpp"

namespace crowd {

namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;
constexpr Real kNormFloor = 1e-9;

Real wrap_angle(Real a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;  // a + 2pi can round up to exactly 2pi
}

Real chamber_radius(const ScenarioSpec& s) { return s.diameter_or_side_mm / 2.0; }

Vec2 column_center(const ScenarioSpec& s) {
  // Column edge sits column_clearance_mm inside the exit-side boundary, on
  // the symmetry line.
  const Real r = chamber_radius(s);
  return Vec2(r - s.column_clearance_mm - s.column_diameter_mm / 2.0, 0.0);
}

// Exit midpoint on the continuous boundary, in mm.
Vec2 exit_midpoint(const ScenarioSpec& s) {
  if (s.shape == ChamberShape::Square)
    return Vec2(s.diameter_or_side_mm, s.diameter_or_side_mm - s.exit_width_mm / 2.0);
  return Vec2(chamber_radius(s), 0.0);
}

bool point_in_chamber(const ScenarioSpec& s, const Vec2& p) {
  if (s.shape == ChamberShape::Square) {
    const Real l = s.diameter_or_side_mm;
    return p.x() > 0 && p.x() < l && p.y() > 0 && p.y() < l;
  }
  if (p.norm() >= chamber_radius(s)) return false;
  if (s.has_column() &&
      (p - column_center(s)).norm() <= s.column_diameter_mm / 2.0)
    return false;
  return true;
}

bool point_in_column(const ScenarioSpec& s, const Vec2& p) {
  return s.has_column() && (p - column_center(s)).norm() <= s.column_diameter_mm / 2.0;
}

// Is a boundary point within the continuous exit segment/arc?
bool on_exit(const ScenarioSpec& s, const Vec2& w) {
  if (s.shape == ChamberShape::Square) {
    const Real l = s.diameter_or_side_mm;
    return std::abs(w.x() - l) < 1e-9 && w.y() >= l - s.exit_width_mm - 1e-9;
  }
  const Real half_angle = s.exit_width_mm / 2.0 / chamber_radius(s);
  return std::abs(angular_distance(wrap_angle(std::atan2(w.y(), w.x())), 0.0)) <= half_angle;
}

Vec2 orient_toward(const Vec2& tangent, const Vec2& hit, const Vec2& target) {
  return tangent.dot(target - hit) < 0 ? Vec2(-tangent) : tangent;
}

}  // namespace

RayHit cast_ray(const ScenarioSpec& s, const Vec2& p, Real angle) {
  const Vec2 u(std::cos(angle), std::sin(angle));
  const Vec2 e_star = exit_midpoint(s);
  Real t_boundary = std::numeric_limits<Real>::infinity();
  Vec2 tangent = Vec2::UnitX();

  if (s.shape == ChamberShape::Square) {
    const Real l = s.diameter_or_side_mm;
    struct Edge {
      Vec2 point, normal, dir;
    };
    const Edge edges[4] = {{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)},
                           {Vec2(l, 0), Vec2(1, 0), Vec2(0, 1)},
                           {Vec2(0, 0), Vec2(0, 1), Vec2(1, 0)},
                           {Vec2(0, l), Vec2(0, 1), Vec2(1, 0)}};
    for (const Edge& e : edges) {
      const Real denom = u.dot(e.normal);
      if (std::abs(denom) < 1e-14) continue;
      const Real t = (e.point - p).dot(e.normal) / denom;
      if (t <= 1e-12 || t >= t_boundary) continue;
      const Vec2 w = p + t * u;
      const Real along = (w - e.point).dot(e.dir);
      if (along < -1e-9 || along > l + 1e-9) continue;
      t_boundary = t;
      tangent = e.dir;
    }
  } else {
    const Real r = chamber_radius(s);
    const Real b = p.dot(u);
    const Real disc = b * b + r * r - p.squaredNorm();
    t_boundary = -b + std::sqrt(std::max(disc, 0.0));
    const Vec2 w = p + t_boundary * u;
    tangent = Vec2(-w.y(), w.x()).normalized();
  }

  RayHit hit;
  Vec2 w = p + t_boundary * u;

  if (s.has_column()) {
    const Vec2 cc = column_center(s);
    const Real rc = s.column_diameter_mm / 2.0;
    const Vec2 rel = p - cc;
    const Real b = rel.dot(u);
    const Real disc = b * b - (rel.squaredNorm() - rc * rc);
    if (disc >= 0) {
      const Real t = -b - std::sqrt(disc);
      if (t > 1e-12 && t < t_boundary) {
        w = p + t * u;
        const Vec2 radial = (w - cc).normalized();
        hit.distance_mm = t;
        hit.tangent = orient_toward(Vec2(-radial.y(), radial.x()), w, e_star);
        return hit;
      }
    }
  }

  hit.distance_mm = t_boundary;
  hit.through_exit = on_exit(s, w);
  hit.tangent = orient_toward(tangent, w, e_star);
  return hit;
}

Real preferred_angle(Real d_exit, const Vec2& u_exit, Real d_wall, const Vec2& u_wall) {
  const Vec2 w = (1.0 - d_exit) * u_exit + (1.0 - d_wall) * u_wall;
  const Real norm = w.norm();
  if (norm < kNormFloor) return wrap_angle(std::atan2(u_exit.y(), u_exit.x()));
  return wrap_angle(std::atan2(w.y(), w.x()));
}

GeometryGrid build_geometry(const ScenarioSpec& s) {
  if (s.diameter_or_side_mm <= 0 || s.dx_mm <= 0 || s.dy_mm <= 0)
    throw ConfigError("scenario: chamber size and cell widths must be positive");
  if (s.exit_width_mm <= 0 || s.exit_width_mm > s.diameter_or_side_mm)
    throw ConfigError("scenario: exit width must be positive and fit the chamber");
  if (s.max_speed_mm_s <= 0 || s.max_density_per_mm2 <= 0)
    throw ConfigError("scenario: physical constants must be positive");

  const Real d_ref = s.characteristic_length_mm();
  GeometryGrid g;
  g.dirs = DirectionSet::make(s.n_d);

  const Real span = s.diameter_or_side_mm;
  const Index inner_x = static_cast<Index>(std::llround(span / s.dx_mm));
  const Index inner_y = static_cast<Index>(std::llround(span / s.dy_mm));
  g.spec.nx = inner_x + 2;
  g.spec.ny = inner_y + 2;
  g.spec.dx = s.dx_mm / d_ref;
  g.spec.dy = s.dy_mm / d_ref;
  g.spec.characteristic_length_mm = d_ref;
  g.spec.max_speed_mm_s = s.max_speed_mm_s;
  g.spec.max_density_per_mm2 = s.max_density_per_mm2;
  g.spec.interaction_rate = s.decision_rate_hz * g.spec.ref_time_s();

  // Physical cell centers; the chamber frame is centered for the circle and
  // corner-anchored for the square.
  Vec2 origin_mm;
  if (s.shape == ChamberShape::Square)
    origin_mm = Vec2(-s.dx_mm / 2.0, -s.dy_mm / 2.0);
  else
    origin_mm = Vec2(-static_cast<Real>(g.spec.nx - 1) * s.dx_mm / 2.0,
                     -static_cast<Real>(g.spec.ny - 1) * s.dy_mm / 2.0);
  g.spec.origin = origin_mm / d_ref;

  const Index n_cells = g.n_cells();
  auto center_mm = [&](Index cell) -> Vec2 {
    return origin_mm + Vec2(s.dx_mm * static_cast<Real>(cell % g.spec.nx),
                            s.dy_mm * static_cast<Real>(cell / g.spec.nx));
  };

  g.kinds.assign(static_cast<std::size_t>(n_cells), CellKind::Wall);
  for (Index c = 0; c < n_cells; ++c) {
    const Vec2 p = center_mm(c);
    if (point_in_chamber(s, p))
      g.kinds[static_cast<std::size_t>(c)] = CellKind::Walkable;
    else if (point_in_column(s, p))
      g.kinds[static_cast<std::size_t>(c)] = CellKind::Obstacle;
  }

  // Exit cells: boundary cells adjacent to a walkable one whose centers fall
  // inside the exit band.
  std::vector<Index> exit_cells;
  for (Index c = 0; c < n_cells; ++c) {
    if (g.kinds[static_cast<std::size_t>(c)] != CellKind::Wall) continue;
    const Index ix = g.ix_of(c), iy = g.iy_of(c);
    bool touches_walkable = false;
    const Index nbors[4][2] = {{ix - 1, iy}, {ix + 1, iy}, {ix, iy - 1}, {ix, iy + 1}};
    for (auto& nb : nbors) {
      if (nb[0] < 0 || nb[0] >= g.spec.nx || nb[1] < 0 || nb[1] >= g.spec.ny) continue;
      if (g.is_walkable(g.cell_index(nb[0], nb[1]))) touches_walkable = true;
    }
    if (!touches_walkable) continue;
    const Vec2 p = center_mm(c);
    bool in_band;
    if (s.shape == ChamberShape::Square) {
      const Real l = s.diameter_or_side_mm;
      in_band = p.x() > l && p.y() >= l - s.exit_width_mm && p.y() <= l;
    } else {
      const Real half_angle = s.exit_width_mm / 2.0 / chamber_radius(s);
      in_band = angular_distance(wrap_angle(std::atan2(p.y(), p.x())), 0.0) <= half_angle;
    }
    if (in_band) {
      g.kinds[static_cast<std::size_t>(c)] = CellKind::Exit;
      exit_cells.push_back(c);
    }
  }
  if (exit_cells.empty())
    throw ConfigError("scenario: grid too coarse to represent the exit (exit spans 0 cells)");

  for (Index c = 0; c < n_cells; ++c)
    if (g.is_walkable(c)) g.walkable_cells.push_back(c);
  if (g.walkable_cells.empty()) throw ConfigError("scenario: no walkable cells");

  // Distance and direction to the discretized exit set.
  g.d_exit.setOnes(n_cells);
  g.u_exit.resize(2, n_cells);
  g.u_exit.row(0).setOnes();
  g.u_exit.row(1).setZero();
  const Vec2 outward = s.shape == ChamberShape::Square ? Vec2(1, 0) : Vec2(0, 0);
  for (Index c = 0; c < n_cells; ++c) {
    const Vec2 p = center_mm(c);
    if (g.kind(c) == CellKind::Exit) {
      g.d_exit[c] = 0;
      g.u_exit.col(c) = s.shape == ChamberShape::Square ? outward : Vec2(p.normalized());
      continue;
    }
    Real best = std::numeric_limits<Real>::infinity();
    Vec2 nearest = Vec2::Zero();
    for (Index e : exit_cells) {
      const Vec2 q = center_mm(e);
      const Real dist = (q - p).norm();
      if (dist < best) {
        best = dist;
        nearest = q;
      }
    }
    g.d_exit[c] = std::clamp(best / d_ref, 0.0, 1.0);
    g.u_exit.col(c) = (nearest - p) / best;
  }

  // Wall collision fields and the geometric preferred angle, walkable cells
  // only.
  const Index n_d = g.dirs.n_d;
  g.d_wall.setOnes(n_d, n_cells);
  g.u_wall_x.setZero(n_d, n_cells);
  g.u_wall_y.setOnes(n_d, n_cells);
  g.theta_g.setZero(n_d, n_cells);
  for (Index c : g.walkable_cells) {
    const Vec2 p = center_mm(c);
    const Vec2 u_e = g.u_exit.col(c);
    for (Index h = 0; h < n_d; ++h) {
      const RayHit hit = cast_ray(s, p, g.dirs.angles[h]);
      const Real dw =
          hit.through_exit ? 1.0 : std::clamp(hit.distance_mm / d_ref, 0.0, 1.0);
      g.d_wall(h, c) = dw;
      g.u_wall_x(h, c) = hit.tangent.x();
      g.u_wall_y(h, c) = hit.tangent.y();
      g.theta_g(h, c) = preferred_angle(g.d_exit[c], u_e, dw, hit.tangent);
    }
  }
  return g;
}

Real geometric_preferred_angle(const GeometryGrid& grid, Index cell, Index h) {
  return grid.theta_g(h, cell);
}

std::pair<Real, Vec2> wall_collision(const GeometryGrid& grid, Index cell, Index h) {
  return {grid.d_wall(h, cell), Vec2(grid.u_wall_x(h, cell), grid.u_wall_y(h, cell))};
}

GeometryGrid make_test_box(Index nx_inner, Index ny_inner, Real dx, Real dy,
                           const DirectionSet& dirs, bool periodic) {
  GeometryGrid g;
  g.dirs = dirs;
  g.periodic = periodic;
  const Index pad = periodic ? 0 : 1;
  g.spec.nx = nx_inner + 2 * pad;
  g.spec.ny = ny_inner + 2 * pad;
  g.spec.dx = dx;
  g.spec.dy = dy;
  g.spec.origin = Vec2::Zero();
  g.spec.characteristic_length_mm = 1;
  g.spec.max_speed_mm_s = 1;
  g.spec.max_density_per_mm2 = 1;

  const Index n_cells = g.n_cells();
  g.kinds.assign(static_cast<std::size_t>(n_cells), CellKind::Walkable);
  if (!periodic) {
    for (Index c = 0; c < n_cells; ++c) {
      const Index ix = g.ix_of(c), iy = g.iy_of(c);
      if (ix == 0 || ix == g.spec.nx - 1 || iy == 0 || iy == g.spec.ny - 1)
        g.kinds[static_cast<std::size_t>(c)] = CellKind::Wall;
    }
  }
  for (Index c = 0; c < n_cells; ++c)
    if (g.is_walkable(c)) g.walkable_cells.push_back(c);

  g.d_exit.setOnes(n_cells);
  g.u_exit.resize(2, n_cells);
  g.u_exit.row(0).setOnes();
  g.u_exit.row(1).setZero();
  g.d_wall.setOnes(dirs.n_d, n_cells);
  g.u_wall_x.setZero(dirs.n_d, n_cells);
  g.u_wall_y.setOnes(dirs.n_d, n_cells);
  g.theta_g.resize(dirs.n_d, n_cells);
  for (Index h = 0; h < dirs.n_d; ++h) g.theta_g.row(h).setConstant(dirs.angles[h]);
  return g;
}

}  // namespace crowd
