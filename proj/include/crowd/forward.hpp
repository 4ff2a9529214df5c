#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "crowd/geometry.hpp"
#include "crowd/types.hpp"

namespace crowd {

struct TimeGrid {
  Real dt = 0;          // dimensionless step
  Index n_steps = 0;    // N
  Index data_stride = 1;  // snapshots every m steps

  Real horizon() const { return dt * static_cast<Real>(n_steps); }
};

struct SolverOptions {
  bool transport = true;        // test fixtures may freeze transport
  bool clamp = false;           // clamp instead of raising on f < 0 / rho > 1
  bool allow_cfl_violation = false;
  int threads = 1;
};

// Geometry-only caches that stay fixed over a whole run: the per-cell A
// tables (empty matrix on non-walkable cells).
struct KineticCache {
  std::vector<MatrixX<Real>> a_tables;
};

KineticCache build_kinetic_cache(const GeometryGrid& grid);

struct ForwardTrajectory {
  std::vector<std::pair<Real, DensityField>> snapshots;  // (time, rho)
  DistributionField final_state;
  std::vector<std::pair<Real, Real>> occupancy;  // (time, head count)
  std::vector<Real> exit_outflow;                // mass leaving per step, >= 0
};

// Physical head count inside the chamber.
Real occupancy_count(const DensityField& rho, const GeometryGrid& grid);

// Largest stable step for the explicit scheme, axis-aligned unit-speed bound
// with a 0.9 safety factor.
Real cfl_max_dt(const GeometryGrid& grid);

// Upwind divergence of v(rho) u_i f^i per direction, donor-cell fluxes with
// the face speed taken from the upwind cell. Wall and obstacle faces are
// sealed; exit faces drain at free-outflow speed v(0) = 1.
DistributionField transport_divergence(const DistributionField& f, const DensityField& rho,
                                       const GeometryGrid& grid, const SolverOptions& options = {});

// Everything in one explicit step that does not depend on the stress field:
// g^n = f^n/dt - div J^n + (1 - rho)(A f - f) - rho^2 f, the density, the
// congestion directions derived from it, and the state itself (the quadratic
// forms in b still need it).
struct StepTerms {
  DistributionField f;
  DistributionField g;
  DensityField rho;
  ArrayXX<int> congestion;
  Real dt = 0;
};

StepTerms step_terms(const DistributionField& f, const GeometryGrid& grid,
                     const KineticCache& cache, Real dt, const SolverOptions& options);

// Per-cell b_i = f^T B^i(eps) f for every walkable cell, and optionally the
// matching eps-derivative quadratic forms f^T dB^i/dE f.
void assemble_b(const StepTerms& terms, const StressField& eps, const GeometryGrid& grid,
                const SolverOptions& options, ArrayXX<Real>& b, ArrayXX<Real>* db);

// f^{n+1} = dt (g^n + rho^n b). Raises StabilityError when the result leaves
// the admissible set (unless clamping).
DistributionField apply_interactions(const StepTerms& terms, const ArrayXX<Real>& b,
                                     const GeometryGrid& grid, const SolverOptions& options,
                                     Index step_index = -1);

DistributionField forward_step(const DistributionField& f, const StressField& eps_next,
                               const GeometryGrid& grid, const KineticCache& cache, Real dt,
                               const SolverOptions& options = {}, Index step_index = -1);

using EpsSchedule = std::function<StressField(Index step)>;

ForwardTrajectory run_forward(const DistributionField& f0, const EpsSchedule& eps_schedule,
                              const GeometryGrid& grid, const KineticCache& cache,
                              const TimeGrid& time, const SolverOptions& options = {});

}  // namespace crowd
