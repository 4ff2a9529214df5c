#include "crowd/forward.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

#include "crowd/parallel.hpp"

namespace crowd {

namespace {

constexpr Real kExitFaceSpeed = 1.0;  // v(0): nothing queues beyond the door

bool resolvable(const GeometryGrid& g, Index ix, Index iy) {
  return g.periodic || (ix >= 0 && ix < g.spec.nx && iy >= 0 && iy < g.spec.ny);
}

Index resolve(const GeometryGrid& g, Index ix, Index iy) {
  if (g.periodic) {
    ix = ((ix % g.spec.nx) + g.spec.nx) % g.spec.nx;
    iy = ((iy % g.spec.ny) + g.spec.ny) % g.spec.ny;
  }
  return g.cell_index(ix, iy);
}

// Donor-cell flux through the face between cells lo and hi (hi = lo + one
// step along the axis), for velocity component cv along that axis. lo/hi may
// be -1 when outside the grid. The transported quantity comes from the
// upwind cell; the face speed comes from the cell being walked INTO, so
// inflow dies off as the receiver jams (rho stays <= 1) and a packed queue
// still steps into open space at full speed. Exit cells count as open space.
Real face_flux(const DistributionField& f, const DensityField& rho, const GeometryGrid& g,
               Index i, Index lo, Index hi, Real cv) {
  if (cv == 0.0) return 0.0;
  const bool lo_walk = lo >= 0 && g.is_walkable(lo);
  const bool hi_walk = hi >= 0 && g.is_walkable(hi);
  if (cv > 0) {
    if (!lo_walk) return 0.0;  // nothing enters from walls, obstacles, or the exit
    if (hi_walk) return cv * speed(rho[hi]) * f(i, lo);
    if (hi >= 0 && g.kind(hi) == CellKind::Exit) return cv * kExitFaceSpeed * f(i, lo);
    return 0.0;  // sealed
  }
  if (!hi_walk) return 0.0;
  if (lo_walk) return cv * speed(rho[lo]) * f(i, hi);
  if (lo >= 0 && g.kind(lo) == CellKind::Exit) return cv * kExitFaceSpeed * f(i, hi);
  return 0.0;
}

std::string cell_label(const GeometryGrid& g, Index cell) {
  std::ostringstream out;
  out << "cell (" << g.ix_of(cell) << ", " << g.iy_of(cell) << ")";
  return out.str();
}

}  // namespace

KineticCache build_kinetic_cache(const GeometryGrid& grid) {
  KineticCache cache;
  cache.a_tables.resize(static_cast<std::size_t>(grid.n_cells()));
  for (Index c : grid.walkable_cells) cache.a_tables[static_cast<std::size_t>(c)] = table_A(grid, c);
  return cache;
}

Real occupancy_count(const DensityField& rho, const GeometryGrid& grid) {
  Real sum = 0;
  for (Index c : grid.walkable_cells) sum += rho[c];
  const GridSpec& s = grid.spec;
  return s.max_density_per_mm2 * s.characteristic_length_mm * s.characteristic_length_mm *
         sum * s.cell_area();
}

Real cfl_max_dt(const GeometryGrid& grid) {
  constexpr Real v_max = 1.0;
  constexpr Real safety = 0.9;
  return safety * std::min(grid.spec.dx, grid.spec.dy) / v_max;
}

DistributionField transport_divergence(const DistributionField& f, const DensityField& rho,
                                       const GeometryGrid& grid, const SolverOptions& options) {
  const Index n_d = grid.dirs.n_d;
  DistributionField div = DistributionField::Zero(n_d, grid.n_cells());
  const Index n_walk = static_cast<Index>(grid.walkable_cells.size());
  parallel_for(n_walk, options.threads, [&](Index begin, Index end) {
    for (Index w = begin; w < end; ++w) {
      const Index c = grid.walkable_cells[static_cast<std::size_t>(w)];
      const Index ix = grid.ix_of(c), iy = grid.iy_of(c);
      const Index east = resolvable(grid, ix + 1, iy) ? resolve(grid, ix + 1, iy) : -1;
      const Index west = resolvable(grid, ix - 1, iy) ? resolve(grid, ix - 1, iy) : -1;
      const Index north = resolvable(grid, ix, iy + 1) ? resolve(grid, ix, iy + 1) : -1;
      const Index south = resolvable(grid, ix, iy - 1) ? resolve(grid, ix, iy - 1) : -1;
      for (Index i = 0; i < n_d; ++i) {
        const Real cx = grid.dirs.units(0, i);
        const Real cy = grid.dirs.units(1, i);
        const Real fe = face_flux(f, rho, grid, i, c, east, cx);
        const Real fw = face_flux(f, rho, grid, i, west, c, cx);
        const Real fn = face_flux(f, rho, grid, i, c, north, cy);
        const Real fs = face_flux(f, rho, grid, i, south, c, cy);
        div(i, c) = (fe - fw) / grid.spec.dx + (fn - fs) / grid.spec.dy;
      }
    }
  });
  return div;
}

StepTerms step_terms(const DistributionField& f, const GeometryGrid& grid,
                     const KineticCache& cache, Real dt, const SolverOptions& options) {
  if (dt <= 0) throw ConfigError("step_terms: dt must be positive");
  StepTerms terms;
  terms.f = f;
  terms.dt = dt;
  terms.rho = density_of(f);
  terms.congestion = congestion_table(terms.rho, grid);
  terms.g = DistributionField::Zero(grid.dirs.n_d, grid.n_cells());

  DistributionField div;
  if (options.transport) div = transport_divergence(f, terms.rho, grid, options);

  const Real rate = grid.spec.interaction_rate;
  const Index n_walk = static_cast<Index>(grid.walkable_cells.size());
  parallel_for(n_walk, options.threads, [&](Index begin, Index end) {
    for (Index w = begin; w < end; ++w) {
      const Index c = grid.walkable_cells[static_cast<std::size_t>(w)];
      const Real rho_c = terms.rho[c];
      const MatrixX<Real>& a = cache.a_tables[static_cast<std::size_t>(c)];
      const VectorX<Real> fc = f.col(c).matrix();
      const VectorX<Real> af = a * fc;
      for (Index i = 0; i < grid.dirs.n_d; ++i) {
        Real g_val = f(i, c) / dt +
                     rate * ((1.0 - rho_c) * (af[i] - f(i, c)) - rho_c * rho_c * f(i, c));
        if (options.transport) g_val -= div(i, c);
        terms.g(i, c) = g_val;
      }
    }
  });
  return terms;
}

void assemble_b(const StepTerms& terms, const StressField& eps, const GeometryGrid& grid,
                const SolverOptions& options, ArrayXX<Real>& b, ArrayXX<Real>* db) {
  const Index n_d = grid.dirs.n_d;
  const Real rate = grid.spec.interaction_rate;
  b.setZero(n_d, grid.n_cells());
  if (db) db->setZero(n_d, grid.n_cells());
  const Index n_walk = static_cast<Index>(grid.walkable_cells.size());
  parallel_for(n_walk, options.threads, [&](Index begin, Index end) {
    // Uniform stress fields are the common case; reuse the previous cell's
    // blend tables whenever eps repeats.
    bool have_tables = false;
    Real table_eps = 0;
    BlendTables blend;
    VectorX<Real> b_cell(n_d), db_cell(n_d);
    for (Index w = begin; w < end; ++w) {
      const Index c = grid.walkable_cells[static_cast<std::size_t>(w)];
      if (!have_tables || eps[c] != table_eps) {
        blend = blend_tables(grid.dirs, eps[c]);
        table_eps = eps[c];
        have_tables = true;
      }
      cell_b(grid.dirs, blend, terms.congestion.col(c), terms.f.col(c).matrix(), b_cell,
             db ? &db_cell : nullptr);
      b.col(c) = rate * b_cell.array();
      if (db) db->col(c) = rate * db_cell.array();
    }
  });
}

DistributionField apply_interactions(const StepTerms& terms, const ArrayXX<Real>& b,
                                     const GeometryGrid& grid, const SolverOptions& options,
                                     Index step_index) {
  const Index n_d = grid.dirs.n_d;
  DistributionField next = DistributionField::Zero(n_d, grid.n_cells());
  std::atomic<Index> bad_cell{-1};
  const Index n_walk = static_cast<Index>(grid.walkable_cells.size());
  parallel_for(n_walk, options.threads, [&](Index begin, Index end) {
    for (Index w = begin; w < end; ++w) {
      const Index c = grid.walkable_cells[static_cast<std::size_t>(w)];
      Real rho_next = 0;
      for (Index i = 0; i < n_d; ++i) {
        Real v = terms.dt * (terms.g(i, c) + terms.rho[c] * b(i, c));
        if (options.clamp) v = std::max(v, 0.0);
        next(i, c) = v;
        rho_next += v;
      }
      if (options.clamp) {
        if (rho_next > 1.0) next.col(c) *= 1.0 / rho_next;
        continue;
      }
      // Negated comparisons so NaN counts as a violation too.
      if (!(next.col(c).minCoeff() >= -kDensityTol) || !(rho_next <= 1.0 + kDensityTol)) {
        Index expected = -1;
        bad_cell.compare_exchange_strong(expected, c);
      }
    }
  });
  if (bad_cell.load() >= 0) {
    const Index c = bad_cell.load();
    const Real rho_c = next.col(c).sum();
    std::ostringstream out;
    out << "scheme instability at " << cell_label(grid, c);
    if (step_index >= 0) out << ", step " << step_index;
    out << ": min f = " << next.col(c).minCoeff() << ", rho = " << rho_c;
    throw StabilityError(out.str());
  }
  return next;
}

DistributionField forward_step(const DistributionField& f, const StressField& eps_next,
                               const GeometryGrid& grid, const KineticCache& cache, Real dt,
                               const SolverOptions& options, Index step_index) {
  if (dt > cfl_max_dt(grid) * (1.0 + 1e-12) && !options.allow_cfl_violation)
    throw StabilityError("forward_step: dt exceeds the CFL bound (pass the override to force)");
  const StepTerms terms = step_terms(f, grid, cache, dt, options);
  ArrayXX<Real> b;
  assemble_b(terms, eps_next, grid, options, b, nullptr);
  return apply_interactions(terms, b, grid, options, step_index);
}

ForwardTrajectory run_forward(const DistributionField& f0, const EpsSchedule& eps_schedule,
                              const GeometryGrid& grid, const KineticCache& cache,
                              const TimeGrid& time, const SolverOptions& options) {
  if (time.dt <= 0) throw ConfigError("run_forward: dt must be positive");
  if (time.data_stride < 1) throw ConfigError("run_forward: data stride must be >= 1");
  if (time.dt > cfl_max_dt(grid) * (1.0 + 1e-12)) {
    if (!options.allow_cfl_violation)
      throw StabilityError("run_forward: dt exceeds the CFL bound (pass the override to force)");
    std::cerr << "warning: dt = " << time.dt << " exceeds the CFL bound "
              << cfl_max_dt(grid) << "; continuing under the override\n";
  }

  ForwardTrajectory traj;
  DistributionField f = f0;
  DensityField rho = density_of(f);
  const Real mass_scale = grid.spec.cell_area();
  traj.snapshots.emplace_back(0.0, rho);
  traj.occupancy.emplace_back(0.0, occupancy_count(rho, grid));

  for (Index n = 0; n < time.n_steps; ++n) {
    const Real mass_before = rho.sum() * mass_scale;
    const StressField eps = eps_schedule(n);
    f = forward_step(f, eps, grid, cache, time.dt, options, n);
    rho = density_of(f);
    const Real t = time.dt * static_cast<Real>(n + 1);
    traj.exit_outflow.push_back(mass_before - rho.sum() * mass_scale);
    traj.occupancy.emplace_back(t, occupancy_count(rho, grid));
    if ((n + 1) % time.data_stride == 0) traj.snapshots.emplace_back(t, rho);
  }
  traj.final_state = std::move(f);
  return traj;
}

}  // namespace crowd
