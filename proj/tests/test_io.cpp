#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "crowd/commands.hpp"
#include "crowd/io.hpp"
#include "helpers.hpp"

using namespace crowd;
using doctest::Approx;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("crowd_test_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  REQUIRE(fa);
  REQUIRE(fb);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return sa == sb;
}

}  // namespace

TEST_CASE("snapshot serialize/parse is the identity on randomized fields") {
  const GeometryGrid& grid = testing::circle_grid();
  const fs::path dir = fresh_dir("snap");
  std::mt19937 rng(3u);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);

  for (int trial = 0; trial < 5; ++trial) {
    DensityField rho = DensityField::Zero(grid.n_cells());
    for (Index c : grid.walkable_cells) rho[c] = unit(rng);
    const SnapshotHeader header = make_header(grid, "circle", "density", 5.0 + trial);
    const fs::path path = dir / ("trial_" + std::to_string(trial) + ".snap");
    write_snapshot(path, header, masked_field(rho, grid));

    const Snapshot back = read_snapshot(path);
    CHECK(back.header.nx == grid.spec.nx);
    CHECK(back.header.ny == grid.spec.ny);
    CHECK(back.header.dx == header.dx);
    CHECK(back.header.time_s == header.time_s);
    CHECK(back.header.field_kind == "density");
    for (Index c = 0; c < grid.n_cells(); ++c) {
      if (grid.is_walkable(c))
        CHECK(back.values[c] == rho[c]);  // %.17g round-trips doubles exactly
      else
        CHECK(std::isnan(back.values[c]));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("observation directories round-trip") {
  const GeometryGrid& grid = testing::circle_grid();
  const KineticCache& cache = testing::circle_cache();
  const ScenarioSpec spec = scenario_preset("circle");
  TimeGrid time;
  time.dt = 0.2 / grid.spec.ref_time_s();
  time.n_steps = 3;

  const ObservationSeries obs = make_synthetic(spec, grid, cache, 0.95, time);
  const fs::path dir = fresh_dir("obs");
  write_observations(dir, "circle", obs, grid);

  const ObservationSeries back = read_observations(dir, grid);
  REQUIRE(back.frames.size() == obs.frames.size());
  CHECK(back.stride_m == obs.stride_m);
  for (std::size_t k = 0; k < obs.frames.size(); ++k) {
    CHECK(back.frames[k].first == Approx(obs.frames[k].first).epsilon(1e-14));
    CHECK((back.frames[k].second == obs.frames[k].second).all());
  }
  fs::remove_all(dir);
}

TEST_CASE("observation mismatches name the offending frame") {
  const GeometryGrid& grid = testing::circle_grid();
  const KineticCache& cache = testing::circle_cache();
  const ScenarioSpec spec = scenario_preset("circle");
  TimeGrid time;
  time.dt = 0.2 / grid.spec.ref_time_s();
  time.n_steps = 2;

  const ObservationSeries obs = make_synthetic(spec, grid, cache, 0.95, time);
  const fs::path dir = fresh_dir("obs_bad");
  write_observations(dir, "circle", obs, grid);

  // Tamper with one frame: wrong nx.
  SnapshotHeader bad = make_header(grid, "circle", "density", 0.2);
  bad.nx = grid.spec.nx - 1;
  write_snapshot(dir / "frame_0001.snap", bad,
                 ArrayX<Real>::Zero(bad.nx * bad.ny));
  try {
    read_observations(dir, grid);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("frame_0001") != std::string::npos);
  }

  // A grid from another scenario is rejected at the index level.
  const GeometryGrid& other = testing::square_grid();
  CHECK_THROWS_AS(read_observations(dir, other), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("csv write/read round trip") {
  const fs::path dir = fresh_dir("csv");
  write_csv(dir / "table.csv", {"time_s", "count"}, {{0.0, 200.0}, {0.5, 199.25}});
  const CsvTable table = read_csv(dir / "table.csv");
  REQUIRE(table.columns.size() == 2);
  CHECK(table.columns[0] == "time_s");
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1][1] == 199.25);
  fs::remove_all(dir);
}

TEST_CASE("config: unknown keys, sign parsing, serialize fixpoint") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_key_value(cfg, "not_a_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_key_value(cfg, "update_sign", "uphill"), ConfigError);
  CHECK_THROWS_AS(apply_key_value(cfg, "dt_s", "fast"), ConfigError);

  apply_key_value(cfg, "scenario", "square");
  apply_key_value(cfg, "xi", "0.1");
  apply_key_value(cfg, "update_sign", "paper");
  apply_key_value(cfg, "snapshot_times_s", "1,2.5,20");
  CHECK(cfg.scenario.shape == ChamberShape::Square);
  CHECK(cfg.update_sign == UpdateSign::Paper);
  REQUIRE(cfg.snapshot_times_s.size() == 3);
  CHECK(cfg.snapshot_times_s[1] == 2.5);

  const fs::path dir = fresh_dir("cfg");
  {
    std::ofstream out(dir / "run.cfg");
    out << serialize_config(cfg);
  }
  RunConfig reloaded;
  apply_config_file(reloaded, dir / "run.cfg");
  CHECK(serialize_config(reloaded) == serialize_config(cfg));
  fs::remove_all(dir);
}

TEST_CASE("simulate command: outputs, zero horizon, rerun from manifest") {
  const fs::path base = fresh_dir("sim");
  RunConfig cfg;
  apply_key_value(cfg, "scenario", "circle");
  cfg.dt_s = 0.2;
  cfg.horizon_s = 1.0;
  cfg.snapshot_times_s = {0.0, 1.0};
  cfg.out_dir = (base / "a").string();

  REQUIRE(cmd_simulate(cfg) == kExitOk);
  CHECK(fs::exists(base / "a" / "manifest.cfg"));
  CHECK(fs::exists(base / "a" / "occupancy.csv"));
  CHECK(fs::exists(base / "a" / "density_t0.000.snap"));
  CHECK(fs::exists(base / "a" / "density_t1.000.snap"));

  // Re-running from the manifest reproduces the outputs byte for byte.
  RunConfig from_manifest;
  apply_config_file(from_manifest, base / "a" / "manifest.cfg");
  from_manifest.out_dir = (base / "b").string();
  REQUIRE(cmd_simulate(from_manifest) == kExitOk);
  CHECK(same_bytes(base / "a" / "density_t1.000.snap", base / "b" / "density_t1.000.snap"));
  CHECK(same_bytes(base / "a" / "occupancy.csv", base / "b" / "occupancy.csv"));

  // Zero horizon: initial snapshot only.
  RunConfig zero = cfg;
  zero.horizon_s = 0.0;
  zero.out_dir = (base / "zero").string();
  REQUIRE(cmd_simulate(zero) == kExitOk);
  CHECK(fs::exists(base / "zero" / "density_t0.000.snap"));
  CHECK_FALSE(fs::exists(base / "zero" / "density_t1.000.snap"));

  // The headline forward run: three snapshot times over a 20 s horizon.
  RunConfig headline = cfg;
  headline.horizon_s = 20.0;
  headline.snapshot_times_s = {5, 10, 20};
  headline.out_dir = (base / "headline").string();
  REQUIRE(cmd_simulate(headline) == kExitOk);
  CHECK(fs::exists(base / "headline" / "density_t5.000.snap"));
  CHECK(fs::exists(base / "headline" / "density_t10.000.snap"));
  CHECK(fs::exists(base / "headline" / "density_t20.000.snap"));
  CHECK(fs::exists(base / "headline" / "occupancy.csv"));
  fs::remove_all(base);
}

TEST_CASE("command error contracts: config, io, and grid mismatches") {
  RunConfig bad;
  bad.dt_s = -1;
  bad.out_dir = (fresh_dir("err") / "x").string();
  CHECK(cmd_simulate(bad) == kExitConfig);

  RunConfig unwritable;
  unwritable.dt_s = 0.2;
  unwritable.horizon_s = 0.2;
  unwritable.out_dir = "/proc/crowd_forbidden/out";
  CHECK(cmd_simulate(unwritable) == kExitIo);

  // estimate on observations from a different grid.
  const fs::path base = fresh_dir("mismatch");
  RunConfig synth;
  apply_key_value(synth, "scenario", "circle");
  synth.dt_s = 0.2;
  synth.horizon_s = 0.4;
  synth.out_dir = (base / "obs").string();
  REQUIRE(cmd_make_synthetic(synth) == kExitOk);

  RunConfig est = synth;
  apply_key_value(est, "scenario", "square");
  est.out_dir = (base / "est").string();
  CHECK(cmd_estimate(est, base / "obs") == kExitConfig);
  fs::remove_all(base);
}

TEST_CASE("estimate and compare commands round trip") {
  const fs::path base = fresh_dir("pipeline");
  RunConfig cfg;
  apply_key_value(cfg, "scenario", "circle");
  cfg.dt_s = 0.2;
  cfg.horizon_s = 1.0;
  cfg.eps_true = 0.9;
  cfg.eps0 = 0.9;  // perfect twin: converges instantly
  cfg.xi = 0;
  cfg.out_dir = (base / "obs").string();
  REQUIRE(cmd_make_synthetic(cfg) == kExitOk);

  cfg.out_dir = (base / "est").string();
  REQUIRE(cmd_estimate(cfg, base / "obs") == kExitOk);
  CHECK(fs::exists(base / "est" / "functional.csv"));
  CHECK(fs::exists(base / "est" / "iterations.csv"));
  CHECK(fs::exists(base / "est" / "occupancy.csv"));
  CHECK(fs::exists(base / "est" / "density_t1.000.snap"));
  CHECK(fs::exists(base / "est" / "stress_t1.000.snap"));

  const CsvTable iters = read_csv(base / "est" / "iterations.csv");
  for (const auto& row : iters.rows) {
    CHECK(row[1] == 1.0);  // one iteration per step on perfect data
    CHECK(row[3] == 1.0);  // converged
  }

  // A run compared with itself has zero differences.
  REQUIRE(cmd_compare(base / "est", base / "est", base / "cmp") == kExitOk);
  const CsvTable cmp = read_csv(base / "cmp" / "compare.csv");
  REQUIRE(!cmp.rows.empty());
  for (const auto& row : cmp.rows) {
    CHECK(row[1] == 0.0);
    CHECK(row[2] == 0.0);
  }

  // Disjoint snapshot times are a configuration error.
  RunConfig other = cfg;
  other.dt_s = 0.25;
  other.horizon_s = 1.0;
  other.out_dir = (base / "obs2").string();
  REQUIRE(cmd_make_synthetic(other) == kExitOk);
  CHECK(cmd_compare(base / "obs", base / "obs2", base / "cmp2") == kExitConfig);
  fs::remove_all(base);
}

TEST_CASE("snapshot parser rejects malformed files") {
  const fs::path dir = fresh_dir("badsnap");
  auto write_file = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return dir / name;
  };

  CHECK_THROWS_AS(read_snapshot(write_file("magic.snap", "not a snapshot\n")), IoError);
  CHECK_THROWS_AS(read_snapshot(write_file(
                      "truncated.snap",
                      "crowdsnap 1\nfield = density\nnx = 2\nny = 2\ndx = 1\ndy = 1\n\n0,0\n")),
                  IoError);
  CHECK_THROWS_AS(read_snapshot(write_file(
                      "short_row.snap",
                      "crowdsnap 1\nfield = density\nnx = 3\nny = 1\ndx = 1\ndy = 1\n\n0,0\n")),
                  IoError);
  CHECK_THROWS_AS(read_snapshot(write_file(
                      "bad_key.snap",
                      "crowdsnap 1\nwut = 1\nnx = 1\nny = 1\ndx = 1\ndy = 1\n\n0\n")),
                  IoError);
  CHECK_THROWS_AS(read_snapshot(write_file(
                      "bad_number.snap",
                      "crowdsnap 1\nfield = density\nnx = 1\nny = 1\ndx = 1\ndy = 1\n\nzero\n")),
                  IoError);
  fs::remove_all(dir);
}

TEST_CASE("estimation is invariant to the worker thread count") {
  const GeometryGrid& grid = testing::circle_grid();
  const KineticCache& cache = testing::circle_cache();
  const ScenarioSpec spec = scenario_preset("circle");
  TimeGrid time;
  time.dt = 0.15 / grid.spec.ref_time_s();
  time.n_steps = 8;
  const ObservationSeries obs = make_synthetic(spec, grid, cache, 0.95, time);
  const DistributionField f0 = initial_state(spec, grid);

  DescentConfig cfg;
  cfg.eps_ref = uniform_stress(grid, 0.75);
  cfg.xi = 0.1;
  cfg.max_iters = 40;

  SolverOptions serial;
  SolverOptions threaded;
  threaded.threads = 3;
  const EstimationResult a =
      estimate(f0, uniform_stress(grid, 0.05), obs, grid, cache, time, cfg, serial);
  const EstimationResult b =
      estimate(f0, uniform_stress(grid, 0.05), obs, grid, cache, time, cfg, threaded);
  for (std::size_t n = 0; n < a.times.size(); ++n) {
    CHECK((a.eps_history[n] == b.eps_history[n]).all());
    CHECK((a.rho_history[n] == b.rho_history[n]).all());
    CHECK(a.residual_per_step[n] == b.residual_per_step[n]);
  }
}
