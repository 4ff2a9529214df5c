#include "crowd/inverse.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace crowd {

namespace {

void check_cells(const GeometryGrid& grid, Index size, const char* what) {
  if (size != grid.n_cells()) {
    std::ostringstream out;
    out << what << ": field has " << size << " cells, grid has " << grid.n_cells();
    throw ConfigError(out.str());
  }
}

void check_config(const DescentConfig& cfg, const GeometryGrid& grid) {
  if (cfg.delta <= 0) throw ConfigError("descent: delta must be positive");
  if (cfg.xi < 0) throw ConfigError("descent: xi must be nonnegative");
  if (cfg.tol <= 0) throw ConfigError("descent: tol must be positive");
  if (cfg.max_iters < 1) throw ConfigError("descent: max_iters must be >= 1");
  check_cells(grid, cfg.eps_ref.size(), "descent eps_ref");
}

}  // namespace

StressField uniform_stress(const GeometryGrid& grid, Real value) {
  return StressField::Constant(grid.n_cells(), value);
}

Real mismatch_functional(const DensityField& rho, const DensityField& rho_v,
                         const GeometryGrid& grid) {
  check_cells(grid, rho.size(), "mismatch rho");
  check_cells(grid, rho_v.size(), "mismatch rho_v");
  Real sum = 0;
  for (Index c : grid.walkable_cells) {
    const Real d = rho[c] - rho_v[c];
    sum += d * d;
  }
  return 0.5 * sum * grid.spec.cell_area();
}

Real regularization_term(const StressField& eps, const StressField& eps_ref, Real xi,
                         const GeometryGrid& grid) {
  if (xi == 0) return 0;
  check_cells(grid, eps.size(), "regularization eps");
  check_cells(grid, eps_ref.size(), "regularization eps_ref");
  Real sum = 0;
  for (Index c : grid.walkable_cells) {
    const Real d = eps[c] - eps_ref[c];
    sum += d * d;
  }
  return 0.5 * xi * sum * grid.spec.cell_area();
}

ArrayXX<Real> adjoint_solve(const DensityField& rho_k1, const DensityField& rho_v, Real dt,
                            const GeometryGrid& grid) {
  check_cells(grid, rho_k1.size(), "adjoint rho");
  check_cells(grid, rho_v.size(), "adjoint rho_v");
  ArrayXX<Real> lambda = ArrayXX<Real>::Zero(grid.dirs.n_d, grid.n_cells());
  const Real scale = dt * grid.spec.cell_area();
  for (Index c : grid.walkable_cells)
    lambda.col(c).setConstant(-scale * (rho_k1[c] - rho_v[c]));
  return lambda;
}

ArrayX<Real> optimality_bracket(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                                const ArrayXX<Real>& db, const DensityField& rho_n,
                                const DescentConfig& cfg, const GeometryGrid& grid) {
  ArrayX<Real> bracket = ArrayX<Real>::Zero(grid.n_cells());
  const Real area = grid.spec.cell_area();
  for (Index c : grid.walkable_cells) {
    const Real reg = cfg.xi * (eps_k[c] - cfg.eps_ref[c]) * area;
    const Real data = rho_n[c] * (db.col(c) * lambda_k1.col(c)).sum();
    bracket[c] = reg - data;
  }
  return bracket;
}

StressField stress_update(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                          const ArrayXX<Real>& db, const DensityField& rho_n,
                          const DescentConfig& cfg, const GeometryGrid& grid) {
  const ArrayX<Real> bracket = optimality_bracket(eps_k, lambda_k1, db, rho_n, cfg, grid);
  const Real sign = cfg.sign == UpdateSign::Paper ? 1.0 : -1.0;
  return (eps_k + sign * cfg.delta * bracket).cwiseMax(0.0).cwiseMin(1.0);
}

Real optimality_residual(const StressField& eps_k, const ArrayXX<Real>& lambda_k1,
                         const ArrayXX<Real>& db, const DensityField& rho_n,
                         const DescentConfig& cfg, const GeometryGrid& grid) {
  const ArrayX<Real> bracket = optimality_bracket(eps_k, lambda_k1, db, rho_n, cfg, grid);
  Real sum = 0;
  for (Index c : grid.walkable_cells) sum += bracket[c] * bracket[c];
  return std::sqrt(sum * grid.spec.cell_area()) / grid.walkable_area();
}

StepEstimate descent_step_loop(const DistributionField& f_n, const StressField& eps_init,
                               const DensityField& rho_v_next, const GeometryGrid& grid,
                               const KineticCache& cache, Real dt, const DescentConfig& cfg,
                               const SolverOptions& options) {
  check_config(cfg, grid);
  check_cells(grid, eps_init.size(), "descent eps_init");
  check_cells(grid, rho_v_next.size(), "descent rho_v");
  if (eps_init.minCoeff() < 0 || eps_init.maxCoeff() > 1)
    throw ConfigError("descent: initial stress field outside [0, 1]");

  const StepTerms terms = step_terms(f_n, grid, cache, dt, options);
  const Real sign = cfg.sign == UpdateSign::Paper ? 1.0 : -1.0;

  StepEstimate out;
  StressField eps = eps_init;
  ArrayXX<Real> b, db;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    assemble_b(terms, eps, grid, options, b, &db);
    out.f = apply_interactions(terms, b, grid, options);
    out.rho = density_of(out.f);
    const ArrayXX<Real> lambda = adjoint_solve(out.rho, rho_v_next, dt, grid);
    const ArrayX<Real> bracket = optimality_bracket(eps, lambda, db, terms.rho, cfg, grid);
    out.eps = (eps + sign * cfg.delta * bracket).cwiseMax(0.0).cwiseMin(1.0);
    Real sum = 0;
    for (Index c : grid.walkable_cells) sum += bracket[c] * bracket[c];
    out.residual = std::sqrt(sum * grid.spec.cell_area()) / grid.walkable_area();
    out.iterations = k;
    if (!std::isfinite(out.residual))
      throw StabilityError("descent: optimality residual is not finite at iteration " +
                           std::to_string(k));
    if (out.residual < cfg.tol) {
      out.converged = true;
      return out;
    }
    eps = out.eps;
  }
  out.converged = false;
  return out;
}

EstimationResult estimate(const DistributionField& f0, const StressField& eps0,
                          const ObservationSeries& observations, const GeometryGrid& grid,
                          const KineticCache& cache, const TimeGrid& time,
                          const DescentConfig& cfg, const SolverOptions& options) {
  check_config(cfg, grid);
  check_cells(grid, eps0.size(), "estimate eps0");
  if (observations.stride_m < 1) throw ConfigError("estimate: stride must be >= 1");
  const Index frames_needed = time.n_steps / observations.stride_m;
  if (static_cast<Index>(observations.frames.size()) < frames_needed)
    throw ConfigError("estimate: observations do not cover the horizon");
  const Real expected_spacing = time.dt * static_cast<Real>(observations.stride_m);
  if (observations.frame_dt > 0 &&
      std::abs(observations.frame_dt - expected_spacing) > 1e-9 * std::max(1.0, expected_spacing))
    throw ConfigError("estimate: observation frames are spaced " +
                      std::to_string(observations.frame_dt) +
                      " time units apart but the solver advances " +
                      std::to_string(expected_spacing) + " per frame; adjust dt or the stride");
  if (time.n_steps > 0 && time.dt > cfl_max_dt(grid) * (1.0 + 1e-12) &&
      !options.allow_cfl_violation)
    throw StabilityError("estimate: dt exceeds the CFL bound (pass the override to force)");

  constexpr Real nan = std::numeric_limits<Real>::quiet_NaN();
  EstimationResult result;
  DistributionField f = f0;
  StressField eps = eps0;
  result.occupancy.emplace_back(0.0, occupancy_count(density_of(f), grid));

  for (Index n = 0; n < time.n_steps; ++n) {
    const Index step = n + 1;
    const Real t = time.dt * static_cast<Real>(step);
    if (step % observations.stride_m == 0) {
      const auto& frame = observations.frames[static_cast<std::size_t>(
          step / observations.stride_m - 1)];
      check_cells(grid, frame.second.size(), "estimate observation frame");
      const StepEstimate r =
          descent_step_loop(f, eps, frame.second, grid, cache, time.dt, cfg, options);
      f = r.f;
      eps = r.eps;
      const Real j = mismatch_functional(r.rho, frame.second, grid);
      const Real reg = regularization_term(eps, cfg.eps_ref, cfg.xi, grid);
      result.mismatch_series.push_back(j);
      result.reg_series.push_back(reg);
      result.functional_series.push_back(j + reg);
      result.iterations_per_step.push_back(r.iterations);
      result.residual_per_step.push_back(r.residual);
      result.converged_per_step.push_back(r.converged ? 1 : 0);
      result.rho_history.push_back(r.rho);
    } else {
      f = forward_step(f, eps, grid, cache, time.dt, options, n);
      result.mismatch_series.push_back(nan);
      result.reg_series.push_back(nan);
      result.functional_series.push_back(nan);
      result.iterations_per_step.push_back(0);
      result.residual_per_step.push_back(nan);
      result.converged_per_step.push_back(1);
      result.rho_history.push_back(density_of(f));
    }
    result.times.push_back(t);
    result.eps_history.push_back(eps);
    result.occupancy.emplace_back(t, occupancy_count(result.rho_history.back(), grid));
  }
  return result;
}

}  // namespace crowd
