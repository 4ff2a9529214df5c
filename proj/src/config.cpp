#include "crowd/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crowd {

namespace {

Real parse_number(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const Real v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': cannot parse number '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&] { return parse_number(key, value); };
  if (key == "scenario") {
    cfg.scenario = scenario_preset(value);
  } else if (key == "dt_s") {
    cfg.dt_s = num();
  } else if (key == "horizon_s") {
    cfg.horizon_s = num();
  } else if (key == "stride_m") {
    cfg.stride_m = static_cast<Index>(num());
  } else if (key == "eps") {
    cfg.eps_true = num();
  } else if (key == "obs_quantize_step") {
    cfg.obs_quantize_step = num();
  } else if (key == "eps0") {
    cfg.eps0 = num();
  } else if (key == "eps_ref") {
    cfg.eps_ref = num();
  } else if (key == "xi") {
    cfg.xi = num();
  } else if (key == "delta") {
    cfg.delta = num();
  } else if (key == "tol") {
    cfg.tol = num();
  } else if (key == "max_iters") {
    cfg.max_iters = static_cast<int>(num());
  } else if (key == "cfl_override") {
    cfg.cfl_override = parse_bool(key, value);
  } else if (key == "clamp") {
    cfg.clamp = parse_bool(key, value);
  } else if (key == "deterministic") {
    cfg.deterministic = parse_bool(key, value);
  } else if (key == "update_sign") {
    if (value == "paper")
      cfg.update_sign = UpdateSign::Paper;
    else if (value == "descent")
      cfg.update_sign = UpdateSign::Descent;
    else
      throw ConfigError("config key 'update_sign': expected paper or descent");
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(num());
  } else if (key == "seed") {
    cfg.seed = static_cast<unsigned long>(num());
  } else if (key == "snapshot_times_s") {
    cfg.snapshot_times_s.clear();
    std::stringstream list(value);
    std::string item;
    while (std::getline(list, item, ','))
      if (!trim(item).empty()) cfg.snapshot_times_s.push_back(parse_number(key, trim(item)));
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "ant_count") {
    cfg.scenario.ant_count = num();
  } else if (key == "exit_width_mm") {
    cfg.scenario.exit_width_mm = num();
  } else if (key == "dx_mm") {
    cfg.scenario.dx_mm = num();
    cfg.scenario.dy_mm = cfg.scenario.dx_mm;
  } else if (key == "dy_mm") {
    cfg.scenario.dy_mm = num();
  } else if (key == "size_mm" || key == "diameter_mm" || key == "side_mm") {
    cfg.scenario.diameter_or_side_mm = num();
  } else if (key == "nd") {
    cfg.scenario.n_d = static_cast<Index>(num());
  } else if (key == "v_max_mm_s") {
    cfg.scenario.max_speed_mm_s = num();
  } else if (key == "rho_max_per_mm2") {
    cfg.scenario.max_density_per_mm2 = num();
  } else if (key == "decision_rate_hz") {
    cfg.scenario.decision_rate_hz = num();
  } else if (key == "column_diameter_mm") {
    cfg.scenario.column_diameter_mm = num();
  } else if (key == "column_clearance_mm" || key == "column_offset_mm") {
    cfg.scenario.column_clearance_mm = num();
  } else if (key == "disk_radius_mm") {
    cfg.scenario.layout.disk_radius_mm = num();
  } else if (key == "disk_offset_mm") {
    cfg.scenario.layout.disk_offset_mm = num();
  } else if (key == "crescent_inner_mm") {
    cfg.scenario.layout.crescent_inner_mm = num();
  } else if (key == "crescent_outer_mm") {
    cfg.scenario.layout.crescent_outer_mm = num();
  } else if (key == "crescent_half_angle_deg") {
    cfg.scenario.layout.crescent_half_angle_deg = num();
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key = value");
    pairs.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  // The scenario preset resets geometry defaults, so it applies first.
  for (const auto& [key, value] : pairs)
    if (key == "scenario") apply_key_value(cfg, key, value);
  for (const auto& [key, value] : pairs)
    if (key != "scenario") apply_key_value(cfg, key, value);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "scenario = " << cfg.scenario.name << '\n';
  out << "size_mm = " << format_real(cfg.scenario.diameter_or_side_mm) << '\n';
  out << "exit_width_mm = " << format_real(cfg.scenario.exit_width_mm) << '\n';
  out << "column_diameter_mm = " << format_real(cfg.scenario.column_diameter_mm) << '\n';
  out << "column_clearance_mm = " << format_real(cfg.scenario.column_clearance_mm) << '\n';
  out << "ant_count = " << format_real(cfg.scenario.ant_count) << '\n';
  out << "dx_mm = " << format_real(cfg.scenario.dx_mm) << '\n';
  out << "dy_mm = " << format_real(cfg.scenario.dy_mm) << '\n';
  out << "v_max_mm_s = " << format_real(cfg.scenario.max_speed_mm_s) << '\n';
  out << "rho_max_per_mm2 = " << format_real(cfg.scenario.max_density_per_mm2) << '\n';
  out << "decision_rate_hz = " << format_real(cfg.scenario.decision_rate_hz) << '\n';
  out << "nd = " << cfg.scenario.n_d << '\n';
  out << "disk_radius_mm = " << format_real(cfg.scenario.layout.disk_radius_mm) << '\n';
  out << "disk_offset_mm = " << format_real(cfg.scenario.layout.disk_offset_mm) << '\n';
  out << "crescent_inner_mm = " << format_real(cfg.scenario.layout.crescent_inner_mm) << '\n';
  out << "crescent_outer_mm = " << format_real(cfg.scenario.layout.crescent_outer_mm) << '\n';
  out << "crescent_half_angle_deg = "
      << format_real(cfg.scenario.layout.crescent_half_angle_deg) << '\n';
  out << "dt_s = " << format_real(cfg.dt_s) << '\n';
  out << "horizon_s = " << format_real(cfg.horizon_s) << '\n';
  out << "stride_m = " << cfg.stride_m << '\n';
  out << "eps = " << format_real(cfg.eps_true) << '\n';
  out << "obs_quantize_step = " << format_real(cfg.obs_quantize_step) << '\n';
  out << "eps0 = " << format_real(cfg.eps0) << '\n';
  out << "eps_ref = " << format_real(cfg.eps_ref) << '\n';
  out << "xi = " << format_real(cfg.xi) << '\n';
  out << "delta = " << format_real(cfg.delta) << '\n';
  out << "tol = " << format_real(cfg.tol) << '\n';
  out << "max_iters = " << cfg.max_iters << '\n';
  out << "cfl_override = " << (cfg.cfl_override ? "true" : "false") << '\n';
  out << "clamp = " << (cfg.clamp ? "true" : "false") << '\n';
  out << "deterministic = " << (cfg.deterministic ? "true" : "false") << '\n';
  out << "update_sign = " << (cfg.update_sign == UpdateSign::Paper ? "paper" : "descent")
      << '\n';
  out << "threads = " << cfg.threads << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "snapshot_times_s = ";
  for (std::size_t i = 0; i < cfg.snapshot_times_s.size(); ++i) {
    if (i) out << ',';
    out << format_real(cfg.snapshot_times_s[i]);
  }
  out << '\n';
  out << "out_dir = " << cfg.out_dir << '\n';
  return out.str();
}

void validate_config(const RunConfig& cfg) {
  if (cfg.dt_s <= 0) throw ConfigError("dt_s must be positive");
  if (cfg.horizon_s < 0) throw ConfigError("horizon_s must be nonnegative");
  if (cfg.stride_m < 1) throw ConfigError("stride_m must be >= 1");
  if (cfg.eps_true < 0 || cfg.eps_true > 1) throw ConfigError("eps must lie in [0, 1]");
  if (cfg.obs_quantize_step < 0) throw ConfigError("obs_quantize_step must be >= 0");
  if (cfg.eps0 < 0 || cfg.eps0 > 1) throw ConfigError("eps0 must lie in [0, 1]");
  if (cfg.eps_ref < 0 || cfg.eps_ref > 1) throw ConfigError("eps_ref must lie in [0, 1]");
  if (cfg.xi < 0) throw ConfigError("xi must be nonnegative");
  if (cfg.delta <= 0) throw ConfigError("delta must be positive");
  if (cfg.tol <= 0) throw ConfigError("tol must be positive");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.scenario.ant_count <= 0) throw ConfigError("ant_count must be positive");
  for (Real t : cfg.snapshot_times_s)
    if (t < 0) throw ConfigError("snapshot times must be nonnegative");
}

TimeGrid time_grid_of(const RunConfig& cfg, const GeometryGrid& grid) {
  TimeGrid time;
  time.dt = cfg.dt_s / grid.spec.ref_time_s();
  time.n_steps = static_cast<Index>(std::llround(cfg.horizon_s / cfg.dt_s));
  time.data_stride = cfg.stride_m;
  return time;
}

SolverOptions solver_options_of(const RunConfig& cfg) {
  SolverOptions options;
  options.allow_cfl_violation = cfg.cfl_override;
  options.clamp = cfg.clamp;
  options.threads = cfg.deterministic ? 1 : cfg.threads;
  return options;
}

DescentConfig descent_config_of(const RunConfig& cfg, const GeometryGrid& grid) {
  DescentConfig dc;
  dc.delta = cfg.delta;
  dc.xi = cfg.xi;
  dc.tol = cfg.tol;
  dc.max_iters = cfg.max_iters;
  dc.eps_ref = uniform_stress(grid, cfg.eps_ref);
  dc.sign = cfg.update_sign;
  return dc;
}

}  // namespace crowd
