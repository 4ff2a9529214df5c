#include "crowd/kinetic.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "crowd/geometry.hpp"

namespace crowd {

namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;
constexpr Real kNormFloor = 1e-9;
constexpr Real kDotClamp = 1.0 - 1e-12;

Real wrap_angle(Real a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;  // a + 2pi can round up to exactly 2pi
}

}  // namespace

DirectionSet DirectionSet::make(Index n_d) {
  if (n_d < 2) throw ConfigError("DirectionSet: need at least 2 directions");
  if (n_d != 8)
    std::cerr << "warning: n_d = " << n_d
              << " breaks the row-stochasticity of the transition tables; "
                 "only n_d = 8 matches the model constraints\n";
  DirectionSet d;
  d.n_d = n_d;
  d.angles.resize(n_d);
  d.units.resize(2, n_d);
  d.rel_cos.resize(n_d);
  const Real dtheta = kTwoPi / static_cast<Real>(n_d);
  for (Index j = 0; j < n_d; ++j) {
    d.angles[j] = dtheta * static_cast<Real>(j);
    d.units.col(j) = Vec2(std::cos(d.angles[j]), std::sin(d.angles[j]));
    d.rel_cos[j] = std::cos(dtheta * static_cast<Real>(j));
  }
  return d;
}

DensityField density_of(const DistributionField& f) {
  return f.colwise().sum().transpose();
}

Vec2 interaction_direction(const DirectionSet& dirs, Index k, Index c_idx, Real eps) {
  const Vec2 u_f = dirs.units.col(dirs.wrap(k));
  const Vec2 u_c = dirs.units.col(dirs.wrap(c_idx));
  if (eps == 0.0) return u_c;
  if (eps == 1.0) return u_f;
  const Vec2 w = eps * u_f + (1.0 - eps) * u_c;
  const Real norm = w.norm();
  if (norm < kNormFloor) return u_c;
  return w / norm;
}

BlendTables blend_tables(const DirectionSet& dirs, Real eps) {
  const Index n = dirs.n_d;
  BlendTables t;
  t.value.setZero(n, n);
  t.d_eps.setZero(n, n);
  for (Index p = 0; p < n; ++p) {
    const Real a_ang = dirs.angles[p];  // u_F relative to u_i
    for (Index q = 0; q < n; ++q) {
      const Real c_ang = dirs.angles[q];  // u_C relative to u_i
      const Vec2 w = eps * Vec2(std::cos(a_ang), std::sin(a_ang)) +
                     (1.0 - eps) * Vec2(std::cos(c_ang), std::sin(c_ang));
      const Real norm = w.norm();
      Real theta_p;
      bool degenerate = norm < kNormFloor;
      if (degenerate)
        theta_p = c_ang;  // eps = 1/2 with u_F = -u_C: keep the no-stress choice
      else
        theta_p = wrap_angle(std::atan2(w.y(), w.x()));
      const Real dist = angular_distance(theta_p, 0.0);
      t.value(p, q) = direction_tent(dist);
      // The derivative quotient degenerates as ||w|| -> 0 (u_F = -u_C near
      // eps = 1/2), so it gets a wider floor than the value fallback.
      if (degenerate || norm < 1e-6 || dist > std::numbers::pi / 4.0) continue;
      const Real a = dirs.rel_cos[p];
      const Real c = dirs.rel_cos[q];
      const Real g = dirs.rel_cos[dirs.wrap(p - q)];
      const Real x = std::clamp(std::cos(theta_p), -kDotClamp, kDotClamp);
      t.d_eps(p, q) = 4.0 / std::numbers::pi / std::sqrt(1.0 - x * x) *
                      blend_dot_derivative(a, c, g, eps);
    }
  }
  return t;
}

MatrixX<Real> table_A(const GeometryGrid& grid, Index cell) {
  const DirectionSet& dirs = grid.dirs;
  MatrixX<Real> a(dirs.n_d, dirs.n_d);
  for (Index h = 0; h < dirs.n_d; ++h) {
    const Real theta_g = grid.theta_g(h, cell);
    for (Index i = 0; i < dirs.n_d; ++i)
      a(i, h) = direction_tent(angular_distance(theta_g, dirs.angles[i]));
  }
  return a;
}

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

// Bilinear sample of rho at a dimensionless point; +inf when the containing
// cell is not walkable, non-walkable corner cells dropped from the stencil.
Real sample_density(const DensityField& rho, const GeometryGrid& grid, Vec2 p) {
  const GridSpec& s = grid.spec;
  auto wrap_ix = [&](Index i) { return ((i % s.nx) + s.nx) % s.nx; };
  auto wrap_iy = [&](Index i) { return ((i % s.ny) + s.ny) % s.ny; };

  Real gx = (p.x() - s.origin.x()) / s.dx;
  Real gy = (p.y() - s.origin.y()) / s.dy;
  Index cx = static_cast<Index>(std::llround(gx));
  Index cy = static_cast<Index>(std::llround(gy));
  if (grid.periodic) {
    cx = wrap_ix(cx);
    cy = wrap_iy(cy);
  } else if (cx < 0 || cx >= s.nx || cy < 0 || cy >= s.ny) {
    return kInf;
  }
  if (!grid.is_walkable(grid.cell_index(cx, cy))) return kInf;

  const Index ix0 = static_cast<Index>(std::floor(gx));
  const Index iy0 = static_cast<Index>(std::floor(gy));
  const Real fx = gx - static_cast<Real>(ix0);
  const Real fy = gy - static_cast<Real>(iy0);
  Real acc = 0, wsum = 0;
  for (int dyi = 0; dyi <= 1; ++dyi) {
    for (int dxi = 0; dxi <= 1; ++dxi) {
      Index ix = ix0 + dxi;
      Index iy = iy0 + dyi;
      if (grid.periodic) {
        ix = wrap_ix(ix);
        iy = wrap_iy(iy);
      } else if (ix < 0 || ix >= s.nx || iy < 0 || iy >= s.ny) {
        continue;
      }
      const Index c = grid.cell_index(ix, iy);
      if (!grid.is_walkable(c)) continue;
      const Real w = (dxi ? fx : 1.0 - fx) * (dyi ? fy : 1.0 - fy);
      acc += w * rho[c];
      wsum += w;
    }
  }
  if (wsum < 1e-12) return kInf;
  return acc / wsum;
}

}  // namespace

Index congestion_direction(const DensityField& rho, const GeometryGrid& grid, Index cell,
                           Index h) {
  const DirectionSet& dirs = grid.dirs;
  const Real delta = std::min(grid.spec.dx, grid.spec.dy);
  const Vec2 base = grid.center(cell);
  const Real rho_here = rho[cell];

  const Index candidates[3] = {dirs.wrap(h - 1), dirs.wrap(h), dirs.wrap(h + 1)};
  Real deriv[3];
  for (int m = 0; m < 3; ++m) {
    const Vec2 probe = base + delta * Vec2(dirs.units.col(candidates[m]));
    const Real val = sample_density(rho, grid, probe);
    deriv[m] = std::isfinite(val) ? (val - rho_here) / delta : kInf;
  }

  // argmin with ties broken toward keeping h, then toward theta_G, then the
  // lower index.
  int best = 1;
  for (int m = 0; m < 3; ++m) {
    if (m == 1) continue;
    if (deriv[m] < deriv[best]) {
      best = m;
    } else if (deriv[m] == deriv[best] && best != 1) {
      const Real tg = grid.theta_g(h, cell);
      const Real da = angular_distance(dirs.angles[candidates[m]], tg);
      const Real db = angular_distance(dirs.angles[candidates[best]], tg);
      if (da < db || (da == db && candidates[m] < candidates[best])) best = m;
    }
  }
  return candidates[best];
}

ArrayXX<int> congestion_table(const DensityField& rho, const GeometryGrid& grid) {
  ArrayXX<int> table(grid.dirs.n_d, grid.n_cells());
  table.setZero();
  for (Index cell : grid.walkable_cells)
    for (Index h = 0; h < grid.dirs.n_d; ++h)
      table(h, cell) = static_cast<int>(congestion_direction(rho, grid, cell, h));
  return table;
}

std::pair<std::vector<MatrixX<Real>>, std::vector<MatrixX<Real>>> table_B(
    const GeometryGrid& grid, const DensityField& rho, const StressField& eps, Index cell) {
  const DirectionSet& dirs = grid.dirs;
  const Index n = dirs.n_d;
  const BlendTables blend = blend_tables(dirs, eps[cell]);
  std::vector<MatrixX<Real>> b(static_cast<std::size_t>(n)), db(static_cast<std::size_t>(n));
  Eigen::ArrayXi c_of_h(n);
  for (Index h = 0; h < n; ++h)
    c_of_h[h] = static_cast<int>(congestion_direction(rho, grid, cell, h));
  for (Index i = 0; i < n; ++i) {
    b[static_cast<std::size_t>(i)].resize(n, n);
    db[static_cast<std::size_t>(i)].resize(n, n);
    for (Index h = 0; h < n; ++h) {
      const Index q = dirs.wrap(c_of_h[h] - i);
      for (Index k = 0; k < n; ++k) {
        const Index p = dirs.wrap(k - i);
        b[static_cast<std::size_t>(i)](h, k) = blend.value(p, q);
        db[static_cast<std::size_t>(i)](h, k) = blend.d_eps(p, q);
      }
    }
  }
  return {std::move(b), std::move(db)};
}

void cell_b(const DirectionSet& dirs, const BlendTables& blend,
            const Eigen::Ref<const Eigen::ArrayXi>& c_of_h,
            const Eigen::Ref<const VectorX<Real>>& f_cell, VectorX<Real>& b, VectorX<Real>* db) {
  const Index n = dirs.n_d;
  b.setZero(n);
  if (db) db->setZero(n);
  for (Index h = 0; h < n; ++h) {
    const Real fh = f_cell[h];
    if (fh == 0.0) continue;
    for (Index k = 0; k < n; ++k) {
      const Real w = fh * f_cell[k];
      if (w == 0.0) continue;
      for (Index i = 0; i < n; ++i) {
        const Index p = dirs.wrap(k - i);
        const Index q = dirs.wrap(c_of_h[h] - i);
        b[i] += w * blend.value(p, q);
        if (db) (*db)[i] += w * blend.d_eps(p, q);
      }
    }
  }
}

VectorX<Real> b_vector(const DistributionField& f, const std::vector<MatrixX<Real>>& b_tensors,
                       Index cell) {
  const Index n = static_cast<Index>(b_tensors.size());
  VectorX<Real> b(n);
  const VectorX<Real> fc = f.col(cell).matrix();
  for (Index i = 0; i < n; ++i)
    b[i] = fc.dot(b_tensors[static_cast<std::size_t>(i)] * fc);
  return b;
}

VectorX<Real> interaction_terms(const Eigen::Ref<const VectorX<Real>>& f_cell, Real rho,
                                const MatrixX<Real>& a_table, const VectorX<Real>& b) {
  return (1.0 - rho) * (a_table * f_cell - f_cell) + rho * (b - rho * f_cell);
}

}  // namespace crowd
