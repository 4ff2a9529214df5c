#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowd/forward.hpp"
#include "crowd/inverse.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

// Flat run configuration, shared by every subcommand. Defaults reproduce the
// reference experiments: 1 mm cells, delta = 50, tol = 1e-5. The time step
// defaults to 0.15 s rather than the experiments' 0.5 s because the explicit
// scheme needs the diagonal-direction Courant number below one.
struct RunConfig {
  ScenarioSpec scenario = scenario_preset("circle");
  Real dt_s = 0.15;
  Real horizon_s = 20;
  Index stride_m = 1;
  Real eps_true = 0.95;  // uniform stress level for simulate / make-synthetic
  Real obs_quantize_step = 0;  // synthetic frames rounded to this resolution (0 = exact)
  Real eps0 = 0.05;      // descent start
  Real eps_ref = 0.75;
  Real xi = 0;
  Real delta = 50;
  Real tol = 1e-5;
  int max_iters = 200;
  bool cfl_override = false;
  bool clamp = false;
  bool deterministic = false;
  UpdateSign update_sign = UpdateSign::Descent;
  int threads = 1;
  unsigned long seed = 0;
  std::vector<Real> snapshot_times_s = {5, 10, 20};
  std::string out_dir;
};

// Applies one key from the flat key = value dialect; unknown keys are
// configuration errors. "scenario" resets the preset, so it must come before
// any geometry overrides (apply_config_file reorders accordingly).
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Every effective parameter, loadable again through apply_config_file.
std::string serialize_config(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

TimeGrid time_grid_of(const RunConfig& cfg, const GeometryGrid& grid);

SolverOptions solver_options_of(const RunConfig& cfg);

DescentConfig descent_config_of(const RunConfig& cfg, const GeometryGrid& grid);

}  // namespace crowd
