#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "crowd/types.hpp"

namespace crowd {

struct GeometryGrid;

// Discrete walking directions theta_j = j * 2pi/n_d, j = 0..n_d-1.
// n_d = 8 is the only count for which the pi/4-wide transition tent keeps
// the tables row-stochastic; other values are accepted for experiments but
// warn once on construction.
struct DirectionSet {
  Index n_d = 8;
  ArrayX<Real> angles;
  Eigen::Matrix2Xd units;    // column j = (cos theta_j, sin theta_j)
  ArrayX<Real> rel_cos;      // rel_cos[k] = cos(k * 2pi/n_d)

  static DirectionSet make(Index n_d = 8);

  Index wrap(Index j) const { return ((j % n_d) + n_d) % n_d; }
  Real spacing() const { return 2.0 * std::numbers::pi / static_cast<Real>(n_d); }
};

// Dimensionless walking speed: 1 up to rho_c = 1/5, then the Hermite cubic
// with zero slope at both ends, reaching 0 at rho = 1.
template <class S>
S speed(S rho) {
  constexpr S rho_c = S(1) / S(5);
  if (rho < -S(kDensityTol) || rho > S(1) + S(kDensityTol))
    throw std::domain_error("speed: density outside [0, 1]");
  if (rho <= rho_c) return S(1);
  const S s = (std::min(rho, S(1)) - rho_c) / (S(1) - rho_c);
  return S(1) - S(3) * s * s + S(2) * s * s * s;
}

// Distance on the circle, in [0, pi].
template <class S>
S angular_distance(S p, S q) {
  const S d = std::abs(p - q);
  return d <= std::numbers::pi_v<S> ? d : S(2) * std::numbers::pi_v<S> - d;
}

// Tent profile of the transition probabilities: 1 at zero angular distance,
// linear decay, zero outside the pi/4 cone.
template <class S>
S direction_tent(S dist) {
  constexpr S quarter = std::numbers::pi_v<S> / S(4);
  return dist <= quarter ? S(1) - dist * S(4) / std::numbers::pi_v<S> : S(0);
}

// d(u_P . u_i)/d eps where a = u_F.u_i, c = u_C.u_i, g = u_F.u_C for unit
// vectors u_F, u_C, u_i.
template <class S>
S blend_dot_derivative(S a, S c, S g, S eps) {
  const S q = (S(2) - S(2) * g) * eps * eps + (S(2) * g - S(2)) * eps + S(1);
  return (eps * (g - S(1)) * (a + c) + a - c * g) / (q * std::sqrt(q));
}

DensityField density_of(const DistributionField& f);

// Stress-weighted compromise between the stream direction u_F = u_k and the
// congestion-avoiding direction u_C; falls back to u_C on the degenerate
// eps = 1/2, u_F = -u_C configuration.
Vec2 interaction_direction(const DirectionSet& dirs, Index k, Index c_idx, Real eps);

// Values and eps-derivatives of the pairwise transition entries, indexed by
// the relative offsets p = (k - i) mod n_d and q = (C - i) mod n_d. All of
// B^i_{hk} at a cell reduces to lookups in this table.
struct BlendTables {
  MatrixX<Real> value;
  MatrixX<Real> d_eps;
};

BlendTables blend_tables(const DirectionSet& dirs, Real eps);

// Geometry-driven transition matrix at a cell; entry (i, h) is the
// probability that direction h switches to i, so columns sum to one.
MatrixX<Real> table_A(const GeometryGrid& grid, Index cell);

// Index of the least congested direction among {h-1, h, h+1} (cyclic), read
// from a one-sided directional difference of rho. Ties keep h, then prefer
// the candidate closer to the geometric preferred angle.
Index congestion_direction(const DensityField& rho, const GeometryGrid& grid, Index cell, Index h);

// congestion_direction for every (direction, cell); row = h, column = cell.
ArrayXX<int> congestion_table(const DensityField& rho, const GeometryGrid& grid);

// Full interaction tables at one cell: B[i](h, k) and dB[i](h, k). The solver
// hot path uses blend_tables directly; this form serves the tests and any
// caller that wants the tensors.
std::pair<std::vector<MatrixX<Real>>, std::vector<MatrixX<Real>>> table_B(
    const GeometryGrid& grid, const DensityField& rho, const StressField& eps, Index cell);

// b_i = sum_{h,k} B^i_{hk} f^h f^k and its eps-derivative for one cell.
void cell_b(const DirectionSet& dirs, const BlendTables& blend,
            const Eigen::Ref<const Eigen::ArrayXi>& c_of_h,
            const Eigen::Ref<const VectorX<Real>>& f_cell, VectorX<Real>& b, VectorX<Real>* db);

VectorX<Real> b_vector(const DistributionField& f, const std::vector<MatrixX<Real>>& b_tensors,
                       Index cell);

// I_i = (1 - rho)((A f)_i - f_i) + rho (b_i - rho f_i); sums to zero over i
// whenever both tables are row-stochastic.
VectorX<Real> interaction_terms(const Eigen::Ref<const VectorX<Real>>& f_cell, Real rho,
                                const MatrixX<Real>& a_table, const VectorX<Real>& b);

}  // namespace crowd
