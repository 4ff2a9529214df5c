#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowd/geometry.hpp"
#include "crowd/inverse.hpp"
#include "crowd/types.hpp"

namespace crowd {

// Plain-text field snapshot: a short key = value header, one blank line,
// then ny comma-separated rows of nx values (highest-y row first), with
// non-walkable cells written as nan. 17 significant digits, so doubles
// round-trip exactly.
struct SnapshotHeader {
  int version = 1;
  std::string scenario;
  std::string field_kind;  // "density" or "stress"
  Real time_s = 0;
  Index nx = 0;
  Index ny = 0;
  Real dx = 0;
  Real dy = 0;
};

struct Snapshot {
  SnapshotHeader header;
  ArrayX<Real> values;  // nx * ny, NaN on non-walkable cells
};

void write_snapshot(const std::filesystem::path& path, const SnapshotHeader& header,
                    const ArrayX<Real>& values);

Snapshot read_snapshot(const std::filesystem::path& path);

// Field with non-walkable cells replaced by NaN, ready for serialization.
ArrayX<Real> masked_field(const ArrayX<Real>& field, const GeometryGrid& grid);

SnapshotHeader make_header(const GeometryGrid& grid, const std::string& scenario,
                           const std::string& kind, Real time_s);

// Observation directories: an index file plus one density snapshot per
// frame.
void write_observations(const std::filesystem::path& dir, const std::string& scenario,
                        const ObservationSeries& obs, const GeometryGrid& grid);

ObservationSeries read_observations(const std::filesystem::path& dir, const GeometryGrid& grid);

// Minimal CSV helpers; every report carries a header row and times in
// physical seconds.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<Real>>& rows);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Real>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace crowd
