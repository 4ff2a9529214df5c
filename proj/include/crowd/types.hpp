#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace crowd {

using Real = double;
using Index = Eigen::Index;

template <class Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

using Vec2 = Vector2<Real>;

// Per-cell scalar fields, flattened with cell = iy * nx + ix.
using DensityField = ArrayX<Real>;
using StressField = ArrayX<Real>;

// Direction-resolved occupancy: row = direction, column = cell, so that
// f.col(cell) is the per-cell state vector.
using DistributionField = ArrayXX<Real>;

// Tolerance on the dimensionless density bound rho <= 1.
inline constexpr Real kDensityTol = 1e-10;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct StabilityError : std::runtime_error {
  explicit StabilityError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace crowd
