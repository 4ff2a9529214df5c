#include "crowd/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "crowd/io.hpp"

namespace crowd {

namespace {

namespace fs = std::filesystem;

int report(const char* stage, const std::exception& e, int code) {
  std::cerr << "error [" << stage << "]: " << e.what() << '\n';
  return code;
}

template <class Fn>
int guarded(const char* stage, Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    return report(stage, e, kExitConfig);
  } catch (const StabilityError& e) {
    return report(stage, e, kExitNumerics);
  } catch (const IoError& e) {
    return report(stage, e, kExitIo);
  } catch (const std::filesystem::filesystem_error& e) {
    return report(stage, e, kExitIo);
  } catch (const std::exception& e) {
    return report(stage, e, kExitNumerics);
  }
}

// Outputs go nowhere until the directory is known to be writable.
void prepare_out_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("output directory not set (--out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream test(probe);
    if (!test) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_manifest(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream out(dir / "manifest.cfg");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << serialize_config(cfg);
}

void write_occupancy_csv(const fs::path& path,
                         const std::vector<std::pair<Real, Real>>& occupancy, Real ref_time_s) {
  std::vector<std::vector<Real>> rows;
  rows.reserve(occupancy.size());
  for (const auto& [t, count] : occupancy) rows.push_back({t * ref_time_s, count});
  write_csv(path, {"time_s", "count"}, rows);
}

std::string snap_name(const char* prefix, Real time_s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_t%.3f.snap", prefix, time_s);
  return buf;
}

struct LoadedRun {
  std::map<Real, Snapshot> density;  // keyed by time in seconds
  std::vector<std::pair<Real, Real>> occupancy;
};

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a run directory");
  LoadedRun run;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".snap") continue;
    Snapshot snap = read_snapshot(entry.path());
    if (snap.header.field_kind != "density") continue;
    run.density.emplace(snap.header.time_s, std::move(snap));
  }
  const fs::path occ = dir / "occupancy.csv";
  if (fs::exists(occ)) {
    const CsvTable table = read_csv(occ);
    for (const auto& row : table.rows)
      if (row.size() >= 2) run.occupancy.emplace_back(row[0], row[1]);
  }
  if (run.density.empty())
    throw ConfigError(dir.string() + " contains no density snapshots");
  return run;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  return guarded("simulate", [&] {
    validate_config(cfg);
    const GeometryGrid grid = build_geometry(cfg.scenario);
    const KineticCache cache = build_kinetic_cache(grid);
    const TimeGrid time = time_grid_of(cfg, grid);
    const SolverOptions options = solver_options_of(cfg);
    const DistributionField f0 = initial_state(cfg.scenario, grid);
    prepare_out_dir(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir);

    const StressField eps = uniform_stress(grid, cfg.eps_true);
    const ForwardTrajectory traj =
        run_forward(f0, [&](Index) { return eps; }, grid, cache, time, options);

    const Real ref_time = grid.spec.ref_time_s();
    write_occupancy_csv(fs::path(cfg.out_dir) / "occupancy.csv", traj.occupancy, ref_time);

    std::vector<Real> wanted = cfg.snapshot_times_s;
    if (time.n_steps == 0) wanted = {0.0};
    for (Real t_s : wanted) {
      const Index step = static_cast<Index>(std::llround(t_s / cfg.dt_s));
      if (step < 0 || step > time.n_steps) continue;
      const auto& [t, rho] = traj.snapshots[static_cast<std::size_t>(step)];
      const Real snap_t_s = t * ref_time;
      write_snapshot(fs::path(cfg.out_dir) / snap_name("density", snap_t_s),
                     make_header(grid, cfg.scenario.name, "density", snap_t_s),
                     masked_field(rho, grid));
    }
  });
}

int cmd_make_synthetic(const RunConfig& cfg) {
  return guarded("make-synthetic", [&] {
    validate_config(cfg);
    const GeometryGrid grid = build_geometry(cfg.scenario);
    const KineticCache cache = build_kinetic_cache(grid);
    const TimeGrid time = time_grid_of(cfg, grid);
    prepare_out_dir(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir);

    ForwardTrajectory traj;
    const ObservationSeries obs =
        make_synthetic(cfg.scenario, grid, cache, cfg.eps_true, time,
                       solver_options_of(cfg), &traj, cfg.obs_quantize_step);
    write_observations(cfg.out_dir, cfg.scenario.name, obs, grid);
    write_occupancy_csv(fs::path(cfg.out_dir) / "occupancy.csv", traj.occupancy,
                        grid.spec.ref_time_s());
  });
}

int cmd_estimate(const RunConfig& cfg, const fs::path& observations_dir) {
  return guarded("estimate", [&] {
    validate_config(cfg);
    const GeometryGrid grid = build_geometry(cfg.scenario);
    const KineticCache cache = build_kinetic_cache(grid);
    const TimeGrid time = time_grid_of(cfg, grid);
    const ObservationSeries obs = read_observations(observations_dir, grid);
    const DistributionField f0 = initial_state(cfg.scenario, grid);
    prepare_out_dir(cfg.out_dir);
    write_manifest(cfg, cfg.out_dir);

    const EstimationResult result =
        estimate(f0, uniform_stress(grid, cfg.eps0), obs, grid, cache, time,
                 descent_config_of(cfg, grid), solver_options_of(cfg));

    const Real ref_time = grid.spec.ref_time_s();
    const fs::path out(cfg.out_dir);
    write_occupancy_csv(out / "occupancy.csv", result.occupancy, ref_time);

    std::vector<std::vector<Real>> functional_rows, iter_rows;
    for (std::size_t n = 0; n < result.times.size(); ++n) {
      const Real t_s = result.times[n] * ref_time;
      if (!std::isnan(result.functional_series[n]))
        functional_rows.push_back({t_s, result.mismatch_series[n], result.reg_series[n],
                                   result.functional_series[n]});
      iter_rows.push_back({t_s, static_cast<Real>(result.iterations_per_step[n]),
                           result.residual_per_step[n],
                           static_cast<Real>(result.converged_per_step[n])});
    }
    write_csv(out / "functional.csv", {"time_s", "J", "R", "J_total"}, functional_rows);
    write_csv(out / "iterations.csv", {"time_s", "iterations", "residual", "converged"},
              iter_rows);

    for (std::size_t n = 0; n < result.times.size(); ++n) {
      const Index step = static_cast<Index>(n) + 1;
      if (step % time.data_stride != 0) continue;
      const Real t_s = result.times[n] * ref_time;
      write_snapshot(out / snap_name("density", t_s),
                     make_header(grid, cfg.scenario.name, "density", t_s),
                     masked_field(result.rho_history[n], grid));
      write_snapshot(out / snap_name("stress", t_s),
                     make_header(grid, cfg.scenario.name, "stress", t_s),
                     masked_field(result.eps_history[n], grid));
    }
  });
}

int cmd_compare(const fs::path& run_a, const fs::path& run_b, const fs::path& out_dir) {
  return guarded("compare", [&] {
    const LoadedRun a = load_run(run_a);
    const LoadedRun b = load_run(run_b);
    prepare_out_dir(out_dir);

    constexpr Real time_tol = 1e-6;
    auto same_time = [&](Real x, Real y) { return std::abs(x - y) <= time_tol; };

    std::vector<std::pair<const Snapshot*, const Snapshot*>> matched;
    for (const auto& [t, snap] : a.density) {
      const Snapshot* partner = nullptr;
      for (const auto& [tb, snapb] : b.density)
        if (same_time(t, tb)) partner = &snapb;
      if (!partner)
        throw ConfigError("no matching snapshot time in " + run_b.string() + " for t = " +
                          std::to_string(t) + " s");
      matched.emplace_back(&snap, partner);
    }
    if (a.density.size() != b.density.size())
      throw ConfigError("runs have different snapshot time sets");

    std::vector<std::vector<Real>> rows;
    Real max_l2 = 0, sum_l2 = 0;
    for (const auto& [sa, sb] : matched) {
      const SnapshotHeader& ha = sa->header;
      const SnapshotHeader& hb = sb->header;
      if (ha.nx != hb.nx || ha.ny != hb.ny || std::abs(ha.dx - hb.dx) > 1e-12 ||
          std::abs(ha.dy - hb.dy) > 1e-12)
        throw ConfigError("snapshot grids differ at t = " + std::to_string(ha.time_s) + " s");
      Real sq = 0, max_abs = 0;
      for (Index i = 0; i < sa->values.size(); ++i) {
        const Real va = sa->values[i];
        const Real vb = sb->values[i];
        if (std::isnan(va) != std::isnan(vb))
          throw ConfigError("walkable masks differ at t = " + std::to_string(ha.time_s) + " s");
        if (std::isnan(va)) continue;
        const Real d = va - vb;
        sq += d * d;
        max_abs = std::max(max_abs, std::abs(d));
      }
      const Real l2 = std::sqrt(sq * ha.dx * ha.dy);
      max_l2 = std::max(max_l2, l2);
      sum_l2 += l2;
      rows.push_back({ha.time_s, l2, max_abs});
    }
    write_csv(out_dir / "compare.csv", {"time_s", "l2_diff", "max_abs_diff"}, rows);

    Real occupancy_gap = std::numeric_limits<Real>::quiet_NaN();
    if (!a.occupancy.empty() && !b.occupancy.empty()) {
      const auto& [ta, ca] = a.occupancy.back();
      for (const auto& [tb, cb] : b.occupancy)
        if (same_time(ta, tb)) occupancy_gap = std::abs(ca - cb);
    }

    const Real mean_l2 = rows.empty() ? 0 : sum_l2 / static_cast<Real>(rows.size());
    std::ofstream summary(out_dir / "summary.txt");
    if (!summary) throw IoError("cannot write summary in " + out_dir.string());
    summary << "snapshots_compared = " << rows.size() << '\n';
    summary << "max_l2_diff = " << max_l2 << '\n';
    summary << "mean_l2_diff = " << mean_l2 << '\n';
    summary << "occupancy_gap_final = " << occupancy_gap << '\n';
    std::cout << "compared " << rows.size() << " snapshots: max L2 diff " << max_l2
              << ", mean " << mean_l2 << ", final occupancy gap " << occupancy_gap << '\n';
  });
}

}  // namespace crowd
