#include "crowd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crowd {

namespace {

constexpr char kSnapshotMagic[] = "crowdsnap 1";
constexpr char kIndexMagic[] = "crowdobs 1";

std::string format_real(Real v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Real parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const Real v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw IoError(where + ": cannot parse number '" + s + "'");
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// key = value lines until a blank line.
std::vector<std::pair<std::string, std::string>> read_header_block(std::ifstream& in,
                                                                   const std::string& where) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(where + ": malformed header line '" + line + "'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const SnapshotHeader& header,
                    const ArrayX<Real>& values) {
  if (values.size() != header.nx * header.ny)
    throw IoError("snapshot " + path.string() + ": value count does not match nx * ny");
  auto out = open_out(path);
  out << kSnapshotMagic << '\n';
  out << "scenario = " << header.scenario << '\n';
  out << "field = " << header.field_kind << '\n';
  out << "time_s = " << format_real(header.time_s) << '\n';
  out << "nx = " << header.nx << '\n';
  out << "ny = " << header.ny << '\n';
  out << "dx = " << format_real(header.dx) << '\n';
  out << "dy = " << format_real(header.dy) << '\n';
  out << '\n';
  for (Index iy = header.ny - 1; iy >= 0; --iy) {
    for (Index ix = 0; ix < header.nx; ++ix) {
      if (ix) out << ',';
      out << format_real(values[iy * header.nx + ix]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kSnapshotMagic)
    throw IoError(path.string() + ": not a snapshot file");

  Snapshot snap;
  for (const auto& [key, value] : read_header_block(in, path.string())) {
    if (key == "scenario")
      snap.header.scenario = value;
    else if (key == "field")
      snap.header.field_kind = value;
    else if (key == "time_s")
      snap.header.time_s = parse_real(value, path.string());
    else if (key == "nx")
      snap.header.nx = static_cast<Index>(parse_real(value, path.string()));
    else if (key == "ny")
      snap.header.ny = static_cast<Index>(parse_real(value, path.string()));
    else if (key == "dx")
      snap.header.dx = parse_real(value, path.string());
    else if (key == "dy")
      snap.header.dy = parse_real(value, path.string());
    else
      throw IoError(path.string() + ": unknown header key '" + key + "'");
  }
  if (snap.header.nx < 1 || snap.header.ny < 1)
    throw IoError(path.string() + ": missing grid dimensions");

  snap.values.resize(snap.header.nx * snap.header.ny);
  for (Index iy = snap.header.ny - 1; iy >= 0; --iy) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": truncated data block");
    std::stringstream row(line);
    std::string cellv;
    for (Index ix = 0; ix < snap.header.nx; ++ix) {
      if (!std::getline(row, cellv, ','))
        throw IoError(path.string() + ": short data row");
      snap.values[iy * snap.header.nx + ix] = parse_real(cellv, path.string());
    }
    if (std::getline(row, cellv, ','))
      throw IoError(path.string() + ": long data row");
  }
  return snap;
}

ArrayX<Real> masked_field(const ArrayX<Real>& field, const GeometryGrid& grid) {
  ArrayX<Real> out =
      ArrayX<Real>::Constant(grid.n_cells(), std::numeric_limits<Real>::quiet_NaN());
  for (Index c : grid.walkable_cells) out[c] = field[c];
  return out;
}

SnapshotHeader make_header(const GeometryGrid& grid, const std::string& scenario,
                           const std::string& kind, Real time_s) {
  SnapshotHeader h;
  h.scenario = scenario;
  h.field_kind = kind;
  h.time_s = time_s;
  h.nx = grid.spec.nx;
  h.ny = grid.spec.ny;
  h.dx = grid.spec.dx;
  h.dy = grid.spec.dy;
  return h;
}

void write_observations(const std::filesystem::path& dir, const std::string& scenario,
                        const ObservationSeries& obs, const GeometryGrid& grid) {
  std::filesystem::create_directories(dir);
  const Real ref_time = grid.spec.ref_time_s();
  auto index = open_out(dir / "index.txt");
  index << kIndexMagic << '\n';
  index << "scenario = " << scenario << '\n';
  index << "nx = " << grid.spec.nx << '\n';
  index << "ny = " << grid.spec.ny << '\n';
  index << "dx = " << format_real(grid.spec.dx) << '\n';
  index << "dy = " << format_real(grid.spec.dy) << '\n';
  index << "stride = " << obs.stride_m << '\n';
  index << "frame_dt_s = " << format_real(obs.frame_dt * ref_time) << '\n';
  index << "frames = " << obs.frames.size() << '\n';
  index << '\n';
  for (std::size_t k = 0; k < obs.frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.snap", k + 1);
    const Real t_s = obs.frames[k].first * ref_time;
    index << name << ' ' << format_real(t_s) << '\n';
    write_snapshot(dir / name, make_header(grid, scenario, "density", t_s),
                   masked_field(obs.frames[k].second, grid));
  }
  if (!index) throw IoError("failed while writing " + (dir / "index.txt").string());
}

ObservationSeries read_observations(const std::filesystem::path& dir, const GeometryGrid& grid) {
  const std::filesystem::path index_path = dir / "index.txt";
  auto in = open_in(index_path);
  std::string line;
  if (!std::getline(in, line) || line != kIndexMagic)
    throw IoError(index_path.string() + ": not an observation index");

  Index nx = 0, ny = 0;
  Real dx = 0, dy = 0, frame_dt_s = 0;
  Index stride = 1;
  std::size_t frame_count = 0;
  for (const auto& [key, value] : read_header_block(in, index_path.string())) {
    if (key == "nx")
      nx = static_cast<Index>(parse_real(value, index_path.string()));
    else if (key == "ny")
      ny = static_cast<Index>(parse_real(value, index_path.string()));
    else if (key == "dx")
      dx = parse_real(value, index_path.string());
    else if (key == "dy")
      dy = parse_real(value, index_path.string());
    else if (key == "stride")
      stride = static_cast<Index>(parse_real(value, index_path.string()));
    else if (key == "frame_dt_s")
      frame_dt_s = parse_real(value, index_path.string());
    else if (key == "frames")
      frame_count = static_cast<std::size_t>(parse_real(value, index_path.string()));
  }
  auto grids_match = [&](Index fnx, Index fny, Real fdx, Real fdy) {
    return fnx == grid.spec.nx && fny == grid.spec.ny &&
           std::abs(fdx - grid.spec.dx) <= 1e-12 && std::abs(fdy - grid.spec.dy) <= 1e-12;
  };
  if (!grids_match(nx, ny, dx, dy))
    throw ConfigError("observations in " + dir.string() +
                      " were produced on a different grid than the configured scenario");

  ObservationSeries obs;
  obs.stride_m = stride;
  obs.frame_dt = frame_dt_s / grid.spec.ref_time_s();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string name, time_str;
    row >> name >> time_str;
    if (name.empty()) continue;
    const Snapshot snap = read_snapshot(dir / name);
    if (!grids_match(snap.header.nx, snap.header.ny, snap.header.dx, snap.header.dy))
      throw ConfigError("observation frame " + name + " does not match the configured grid");
    if (snap.header.field_kind != "density")
      throw ConfigError("observation frame " + name + " is not a density field");
    DensityField rho = DensityField::Zero(grid.n_cells());
    for (Index c : grid.walkable_cells) {
      const Real v = snap.values[c];
      if (std::isnan(v))
        throw ConfigError("observation frame " + name + " has nan on a walkable cell");
      if (v < -kDensityTol || v > 1.0 + kDensityTol)
        throw ConfigError("observation frame " + name + " has density outside [0, 1]");
      rho[c] = v;
    }
    obs.frames.emplace_back(snap.header.time_s / grid.spec.ref_time_s(), std::move(rho));
  }
  if (obs.frames.size() != frame_count)
    throw IoError(index_path.string() + ": frame count does not match the listed files");
  return obs;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<Real>>& rows) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out << ',';
    out << columns[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_real(row[i]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty csv");
  std::stringstream head(line);
  std::string col;
  while (std::getline(head, col, ',')) table.columns.push_back(col);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<Real> vals;
    while (std::getline(row, col, ',')) vals.push_back(parse_real(col, path.string()));
    table.rows.push_back(std::move(vals));
  }
  return table;
}

}  // namespace crowd
