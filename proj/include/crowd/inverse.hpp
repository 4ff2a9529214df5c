#pragma once

#include <utility>
#include <vector>

#include "crowd/forward.hpp"
#include "crowd/types.hpp"

namespace crowd {

// Observed density frames, uniformly spaced by stride_m solver steps.
// Frame k corresponds to solver step k * stride_m (the t = 0 state is not a
// frame).
struct ObservationSeries {
  Index stride_m = 1;
  Real frame_dt = 0;  // dimensionless spacing, stride_m * dt
  std::vector<std::pair<Real, DensityField>> frames;  // (dimensionless time, rho_v)
};

enum class UpdateSign {
  Descent,  // eps <- eps - delta * gradient (default; see README)
  Paper,    // eps <- eps + delta * gradient, the formula as printed
};

struct DescentConfig {
  Real delta = 50;
  Real xi = 0;
  Real tol = 1e-5;
  int max_iters = 200;
  StressField eps_ref;  // broadcast scalar or full field
  UpdateSign sign = UpdateSign::Descent;
};

struct StepEstimate {
  DistributionField f;
  DensityField rho;
  StressField eps;
  int iterations = 0;
  Real residual = 0;
  bool converged = false;
};

struct EstimationResult {
  std::vector<StressField> eps_history;
  std::vector<DensityField> rho_history;
  std::vector<Real> times;             // dimensionless step times
  std::vector<Real> mismatch_series;   // J^{n+1}
  std::vector<Real> reg_series;        // R^{n+1}
  std::vector<Real> functional_series; // J + R
  std::vector<int> iterations_per_step;
  std::vector<Real> residual_per_step;
  std::vector<char> converged_per_step;
  std::vector<std::pair<Real, Real>> occupancy;  // (dimensionless time, count)
};

StressField uniform_stress(const GeometryGrid& grid, Real value);

Real mismatch_functional(const DensityField& rho, const DensityField& rho_v,
                         const GeometryGrid& grid);

Real regularization_term(const StressField& eps, const StressField& eps_ref, Real xi,
                         const GeometryGrid& grid);

// Cell form of the adjoint problem: every direction component equals
// -dt (rho_{k+1} - rho_v) dx dy on its cell.
ArrayXX<Real> adjoint_solve(const DensityField& rho_k1, const DensityField& rho_v, Real dt,
                            const GeometryGrid& grid);

// Bracketed optimality expression per cell:
//   xi (eps - eps_ref) dx dy - rho^n sum_i (f^T dB^i/dE f) Lambda^i.
// db holds the quadratic forms (f^T dB^i/dE f) as an (n_d, n_cells) array.
ArrayX<Real> optimality_bracket(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                                const ArrayXX<Real>& db, const DensityField& rho_n,
                                const DescentConfig& cfg, const GeometryGrid& grid);

StressField stress_update(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                          const ArrayXX<Real>& db, const DensityField& rho_n,
                          const DescentConfig& cfg, const GeometryGrid& grid);

Real optimality_residual(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                         const ArrayXX<Real>& db, const DensityField& rho_n,
                         const DescentConfig& cfg, const GeometryGrid& grid);

// One time step of the per-step minimization: iterate state solve, adjoint,
// stress update, and the stopping test until tol or max_iters. Hitting the
// cap is reported, not fatal; the last iterates are returned either way.
StepEstimate descent_step_loop(const DistributionField& f_n, const StressField& eps_init,
                               const DensityField& rho_v_next, const GeometryGrid& grid,
                               const KineticCache& cache, Real dt, const DescentConfig& cfg,
                               const SolverOptions& options = {});

// Outer time loop over the observation frames, warm-starting each step's
// stress field from the previous committed one. Steps between frames (when
// stride_m > 1) advance with the last committed stress field.
EstimationResult estimate(const DistributionField& f0, const StressField& eps0,
                          const ObservationSeries& observations, const GeometryGrid& grid,
                          const KineticCache& cache, const TimeGrid& time,
                          const DescentConfig& cfg, const SolverOptions& options = {});

}  // namespace crowd
