// Command-line front end: simulate | make-synthetic | estimate | compare.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "crowd/commands.hpp"

namespace {

struct CliValues {
  std::string preset, config_file, out_dir, update_sign, observations;
  std::string snapshot_times;
  double eps = -1, eps0 = -1, eps_ref = -1, xi = -1, delta = -1, tol = -1;
  double dt = -1, dx = -1, horizon = -1;
  int max_iters = -1, threads = -1, stride = -1, nd = -1;
  bool deterministic = false, cfl_override = false, clamp = false;
};

void add_common_options(CLI::App* cmd, CliValues& v) {
  cmd->add_option("--preset", v.preset, "scenario preset: circle | circle-column | square");
  cmd->add_option("--config", v.config_file, "flat key = value configuration file");
  cmd->add_option("--out", v.out_dir, "output directory");
  cmd->add_option("--eps", v.eps, "uniform stress level for forward runs");
  cmd->add_option("--eps0", v.eps0, "initial stress level for the estimation");
  cmd->add_option("--eps-ref", v.eps_ref, "regularization reference stress level");
  cmd->add_option("--xi", v.xi, "regularization weight (0 disables)");
  cmd->add_option("--delta", v.delta, "descent step size");
  cmd->add_option("--tol", v.tol, "descent stopping tolerance");
  cmd->add_option("--max-iters", v.max_iters, "descent iteration cap per time step");
  cmd->add_option("--dt", v.dt, "time step in seconds");
  cmd->add_option("--dx", v.dx, "cell width in mm (sets dy too)");
  cmd->add_option("--horizon", v.horizon, "simulated horizon in seconds");
  cmd->add_option("--snapshot-times", v.snapshot_times, "comma list of snapshot times in s");
  cmd->add_option("--stride", v.stride, "observation frames every m solver steps");
  cmd->add_option("--nd", v.nd, "number of walking directions (8 matches the model)");
  cmd->add_option("--threads", v.threads, "worker threads for per-cell loops");
  cmd->add_flag("--deterministic", v.deterministic,
                "force single-threaded, fixed-order reductions");
  cmd->add_flag("--cfl-override", v.cfl_override, "accept a dt above the CFL bound");
  cmd->add_flag("--clamp", v.clamp, "clamp instead of failing on stability violations");
  cmd->add_option("--update-sign", v.update_sign, "stress update sign: descent | paper")
      ->check(CLI::IsMember({"descent", "paper"}));
}

crowd::RunConfig build_config(const CliValues& v) {
  crowd::RunConfig cfg;
  if (!v.preset.empty()) crowd::apply_key_value(cfg, "scenario", v.preset);
  if (!v.config_file.empty()) crowd::apply_config_file(cfg, v.config_file);

  auto set_num = [&](const char* key, double value) {
    if (value >= 0) crowd::apply_key_value(cfg, key, std::to_string(value));
  };
  set_num("eps", v.eps);
  set_num("eps0", v.eps0);
  set_num("eps_ref", v.eps_ref);
  set_num("xi", v.xi);
  set_num("delta", v.delta);
  set_num("tol", v.tol);
  set_num("dt_s", v.dt);
  set_num("dx_mm", v.dx);
  set_num("horizon_s", v.horizon);
  if (v.max_iters >= 0) cfg.max_iters = v.max_iters;
  if (v.threads >= 0) cfg.threads = v.threads;
  if (v.stride >= 0) cfg.stride_m = v.stride;
  if (v.nd >= 0) cfg.scenario.n_d = v.nd;
  if (!v.snapshot_times.empty())
    crowd::apply_key_value(cfg, "snapshot_times_s", v.snapshot_times);
  if (v.deterministic) cfg.deterministic = true;
  if (v.cfl_override) cfg.cfl_override = true;
  if (v.clamp) cfg.clamp = true;
  if (!v.update_sign.empty()) crowd::apply_key_value(cfg, "update_sign", v.update_sign);
  if (!v.out_dir.empty()) cfg.out_dir = v.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic crowd dynamics solver and stress-level estimation"};
  app.require_subcommand(1);

  CliValues vals;
  std::string run_a, run_b;

  CLI::App* simulate = app.add_subcommand("simulate", "run the forward model");
  add_common_options(simulate, vals);

  CLI::App* synth = app.add_subcommand("make-synthetic", "generate twin-experiment frames");
  add_common_options(synth, vals);

  CLI::App* est = app.add_subcommand("estimate", "estimate the stress field from frames");
  add_common_options(est, vals);
  est->add_option("--observations", vals.observations, "observation directory")->required();

  CLI::App* cmp = app.add_subcommand("compare", "compare two run directories");
  cmp->add_option("run_a", run_a, "first run directory")->required();
  cmp->add_option("run_b", run_b, "second run directory")->required();
  cmp->add_option("--out", vals.out_dir, "output directory for the comparison")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return crowd::kExitConfig;
  }

  try {
    if (simulate->parsed()) return crowd::cmd_simulate(build_config(vals));
    if (synth->parsed()) return crowd::cmd_make_synthetic(build_config(vals));
    if (est->parsed()) return crowd::cmd_estimate(build_config(vals), vals.observations);
    if (cmp->parsed()) return crowd::cmd_compare(run_a, run_b, vals.out_dir);
  } catch (const crowd::ConfigError& e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return crowd::kExitConfig;
  }
  return crowd::kExitConfig;
}
