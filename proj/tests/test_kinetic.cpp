#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "crowd/kinetic.hpp"
#include "helpers.hpp"

using namespace crowd;
using doctest::Approx;

namespace {
constexpr Real pi = std::numbers::pi;
}

TEST_CASE("density is the per-cell sum over directions") {
  DistributionField f = DistributionField::Zero(8, 3);
  CHECK(density_of(f).isZero());

  f(0, 1) = 0.1;
  DensityField rho = density_of(f);
  CHECK(rho[0] == 0.0);
  CHECK(rho[1] == Approx(0.1).epsilon(1e-14));

  f.col(2).setConstant(1.0 / 8.0);
  rho = density_of(f);
  CHECK(rho[2] == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("speed law: free branch, jam point, committed cubic") {
  CHECK(speed(0.0) == 1.0);
  CHECK(speed(0.1) == 1.0);
  CHECK(speed(0.2) == 1.0);
  CHECK(speed(1.0) == Approx(0.0).epsilon(1e-14));
  // Hermite cubic midpoint of (rho_c, 1): s = 1/2 -> 1 - 3/4 + 1/4.
  CHECK(speed(0.6) == Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(speed(-0.1), std::domain_error);
  CHECK_THROWS_AS(speed(1.1), std::domain_error);
}

TEST_CASE("speed law is nonincreasing across the slowdown branch") {
  Real prev = 1.0;
  for (int k = 0; k <= 1000; ++k) {
    const Real rho = 0.2 + 0.8 * static_cast<Real>(k) / 1000.0;
    const Real v = speed(rho);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("angular distance branches and metric properties") {
  CHECK(angular_distance(0.0, 0.0) == 0.0);
  CHECK(angular_distance(0.0, 3 * pi / 2) == Approx(pi / 2).epsilon(1e-14));
  CHECK(angular_distance(pi / 4, pi) == Approx(3 * pi / 4).epsilon(1e-14));

  const DirectionSet dirs = DirectionSet::make(8);
  for (Index p = 0; p < 8; ++p) {
    for (Index q = 0; q < 8; ++q) {
      const Real d = angular_distance(dirs.angles[p], dirs.angles[q]);
      CHECK(d == angular_distance(dirs.angles[q], dirs.angles[p]));
      CHECK(d <= pi + 1e-15);
      CHECK((d == 0.0) == (p == q));
    }
  }
}

TEST_CASE("interaction direction: stress limits and symmetric blend") {
  const DirectionSet dirs = DirectionSet::make(8);
  // eps = 0 follows the congestion choice, eps = 1 the stream, exactly.
  for (Index k = 0; k < 8; ++k) {
    for (Index c = 0; c < 8; ++c) {
      CHECK(interaction_direction(dirs, k, c, 0.0) == Vec2(dirs.units.col(c)));
      CHECK(interaction_direction(dirs, k, c, 1.0) == Vec2(dirs.units.col(k)));
    }
  }
  // u_F = (1,0), u_C = (0,1), eps = 1/2.
  const Vec2 u = interaction_direction(dirs, 0, 2, 0.5);
  CHECK(u.x() == Approx(std::numbers::sqrt2 / 2).epsilon(1e-14));
  CHECK(u.y() == Approx(std::numbers::sqrt2 / 2).epsilon(1e-14));
  // Degenerate eps = 1/2 with opposite vectors falls back to u_C.
  const Vec2 fallback = interaction_direction(dirs, 0, 4, 0.5);
  CHECK(fallback == Vec2(dirs.units.col(4)));
}

TEST_CASE("geometry table: exact hit, midway split, column sums") {
  const DirectionSet dirs = DirectionSet::make(8);
  GeometryGrid box = make_test_box(4, 4, 0.1, 0.1, dirs, false);
  const Index cell = box.cell_index(2, 2);

  // theta_G = theta_i exactly: the full row lands on i.
  for (Index h = 0; h < 8; ++h) box.theta_g(h, cell) = dirs.angles[3];
  MatrixX<Real> a = table_A(box, cell);
  for (Index h = 0; h < 8; ++h) {
    for (Index i = 0; i < 8; ++i) CHECK(a(i, h) == Approx(i == 3 ? 1.0 : 0.0).epsilon(1e-14));
  }

  // theta_G midway between two directions: both get 1/2.
  box.theta_g(0, cell) = dirs.angles[1] + pi / 8;
  a = table_A(box, cell);
  CHECK(a(1, 0) == Approx(0.5).epsilon(1e-12));
  CHECK(a(2, 0) == Approx(0.5).epsilon(1e-12));

  // Random preferred angles keep every column stochastic.
  std::mt19937 rng(11u);
  std::uniform_real_distribution<Real> angle(0.0, 2 * pi);
  for (int trial = 0; trial < 200; ++trial) {
    for (Index h = 0; h < 8; ++h) box.theta_g(h, cell) = angle(rng);
    a = table_A(box, cell);
    for (Index h = 0; h < 8; ++h) {
      CHECK(std::abs(a.col(h).sum() - 1.0) <= 1e-12);
      CHECK(a.col(h).minCoeff() >= 0.0);
      CHECK(a.col(h).maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("congestion direction: constant, bump ahead, linear ramp") {
  const DirectionSet dirs = DirectionSet::make(8);
  GeometryGrid box = make_test_box(12, 12, 0.1, 0.1, dirs, false);

  DensityField rho = DensityField::Constant(box.n_cells(), 0.3);
  const Index cell = box.cell_index(6, 6);
  for (Index h = 0; h < 8; ++h) CHECK(congestion_direction(rho, box, cell, h) == h);

  // Denser straight ahead, flat on the diagonals: never keep h.
  rho = DensityField::Constant(box.n_cells(), 0.3);
  rho[box.cell_index(7, 6)] += 0.2;  // probe target along theta_0
  const Index c0 = congestion_direction(rho, box, cell, 0);
  CHECK(c0 != 0);
  CHECK((c0 == 1 || c0 == 7));

  // rho growing with x: for h at pi/2 the 3pi/4 neighbor has the most
  // negative slope.
  for (Index c : box.walkable_cells)
    rho[c] = 0.05 * static_cast<Real>(box.ix_of(c));
  CHECK(congestion_direction(rho, box, cell, 2) == 3);
}

TEST_CASE("blend tables match a direct evaluation of the transition rule") {
  const DirectionSet dirs = DirectionSet::make(8);
  std::mt19937 rng(29u);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Real eps = unit(rng);
    const BlendTables t = blend_tables(dirs, eps);
    for (Index p = 0; p < 8; ++p) {
      for (Index q = 0; q < 8; ++q) {
        const Vec2 u_p = interaction_direction(dirs, p, q, eps);
        const Real dist = angular_distance(std::atan2(u_p.y(), u_p.x()) < 0
                                               ? std::atan2(u_p.y(), u_p.x()) + 2 * pi
                                               : std::atan2(u_p.y(), u_p.x()),
                                           0.0);
        CHECK(t.value(p, q) == Approx(direction_tent(dist)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("interaction tables stay row-stochastic on the real grid") {
  const GeometryGrid& grid = testing::circle_grid();
  std::mt19937 rng(7u);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, grid.walkable_cells.size() - 1);

  for (int trial = 0; trial < 40; ++trial) {
    const Index cell = grid.walkable_cells[pick(rng)];
    const DistributionField f = testing::random_state(grid, rng);
    const DensityField rho = density_of(f);
    const StressField eps = StressField::Constant(grid.n_cells(), unit(rng));
    const auto [b_tensors, db_tensors] = table_B(grid, rho, eps, cell);
    for (Index h = 0; h < 8; ++h) {
      for (Index k = 0; k < 8; ++k) {
        Real sum = 0;
        for (Index i = 0; i < 8; ++i) {
          const Real entry = b_tensors[static_cast<std::size_t>(i)](h, k);
          CHECK(entry >= 0.0);
          CHECK(entry <= 1.0);
          sum += entry;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("stress derivative of the tables matches central differences") {
  const DirectionSet dirs = DirectionSet::make(8);
  std::mt19937 rng(101u);
  std::uniform_real_distribution<Real> eps_draw(0.05, 0.95);
  const Real h_fd = 1e-5;

  int checked = 0;
  while (checked < 1000) {
    const Real eps = eps_draw(rng);
    const BlendTables mid = blend_tables(dirs, eps);
    const BlendTables lo = blend_tables(dirs, eps - h_fd);
    const BlendTables hi = blend_tables(dirs, eps + h_fd);
    for (Index p = 0; p < 8 && checked < 1000; ++p) {
      for (Index q = 0; q < 8 && checked < 1000; ++q) {
        // Keep clear of the cone boundary where the tent is only one-sided
        // differentiable.
        bool near_kink = false;
        for (const BlendTables* t : {&lo, &mid, &hi}) {
          const Real v = t->value(p, q);
          if (v > 0.0 && v < 5e-4) near_kink = true;
          if (std::abs(v - 1.0) < 5e-4) near_kink = true;
        }
        if (near_kink || dirs.rel_cos[dirs.wrap(p - q)] < -0.99) continue;
        const Real fd = (hi.value(p, q) - lo.value(p, q)) / (2 * h_fd);
        CHECK(std::abs(mid.d_eps(p, q) - fd) <= 1e-6);
        ++checked;
      }
    }
  }
}

TEST_CASE("cell quadratic forms agree with the assembled tensors") {
  const GeometryGrid& grid = testing::circle_grid();
  std::mt19937 rng(13u);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, grid.walkable_cells.size() - 1);

  for (int trial = 0; trial < 10; ++trial) {
    const Index cell = grid.walkable_cells[pick(rng)];
    const DistributionField f = testing::random_state(grid, rng);
    const DensityField rho = density_of(f);
    const Real eps_val = unit(rng);
    const StressField eps = StressField::Constant(grid.n_cells(), eps_val);

    const auto [b_tensors, db_tensors] = table_B(grid, rho, eps, cell);
    const VectorX<Real> b_ref = b_vector(f, b_tensors, cell);
    const VectorX<Real> db_ref = b_vector(f, db_tensors, cell);

    Eigen::ArrayXi c_of_h(8);
    for (Index h = 0; h < 8; ++h)
      c_of_h[h] = static_cast<int>(congestion_direction(rho, grid, cell, h));
    VectorX<Real> b, db;
    cell_b(grid.dirs, blend_tables(grid.dirs, eps_val), c_of_h, f.col(cell).matrix(), b, &db);

    CHECK((b - b_ref).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((db - db_ref).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("b vector: bilinear form limits") {
  const GeometryGrid& grid = testing::circle_grid();
  std::mt19937 rng(17u);
  const Index cell = grid.walkable_cells[grid.walkable_cells.size() / 2];

  DistributionField f = DistributionField::Zero(8, grid.n_cells());
  DensityField rho = density_of(f);
  StressField eps = StressField::Constant(grid.n_cells(), 0.4);
  auto [b_tensors, db_tensors] = table_B(grid, rho, eps, cell);
  CHECK(b_vector(f, b_tensors, cell).isZero());

  // One occupied direction: b_i = rho^2 B^i_{hh}.
  f(3, cell) = 0.5;
  rho = density_of(f);
  auto tensors = table_B(grid, rho, eps, cell);
  const VectorX<Real> b = b_vector(f, tensors.first, cell);
  for (Index i = 0; i < 8; ++i)
    CHECK(b[i] == Approx(0.25 * tensors.first[static_cast<std::size_t>(i)](3, 3)).epsilon(1e-13));

  // Row-stochasticity makes the components sum to rho^2.
  const DistributionField fr = testing::random_state(grid, rng);
  const DensityField rho_r = density_of(fr);
  auto tensors_r = table_B(grid, rho_r, eps, cell);
  const VectorX<Real> br = b_vector(fr, tensors_r.first, cell);
  CHECK(br.sum() == Approx(rho_r[cell] * rho_r[cell]).epsilon(1e-12));
}

TEST_CASE("interactions are mass neutral") {
  const GeometryGrid& grid = testing::circle_grid();
  std::mt19937 rng(23u);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, grid.walkable_cells.size() - 1);

  for (int trial = 0; trial < 50; ++trial) {
    const Index cell = grid.walkable_cells[pick(rng)];
    const DistributionField f = testing::random_state(grid, rng);
    const DensityField rho = density_of(f);
    const StressField eps = StressField::Constant(grid.n_cells(), unit(rng));
    const MatrixX<Real> a = table_A(grid, cell);
    const auto tensors = table_B(grid, rho, eps, cell);
    const VectorX<Real> b = b_vector(f, tensors.first, cell);
    const VectorX<Real> terms = interaction_terms(f.col(cell).matrix(), rho[cell], a, b);
    CHECK(std::abs(terms.sum()) <= 1e-12);
  }

  // f = 0 is a fixed point of the interactions.
  const Index cell = grid.walkable_cells.front();
  const DistributionField f0 = DistributionField::Zero(8, grid.n_cells());
  const MatrixX<Real> a = table_A(grid, cell);
  const auto tensors = table_B(grid, density_of(f0), StressField::Zero(grid.n_cells()), cell);
  CHECK(interaction_terms(f0.col(cell).matrix(), 0.0, a, b_vector(f0, tensors.first, cell))
            .isZero());
}

TEST_CASE("interactions at rho = 1 reduce to b - f") {
  const GeometryGrid& grid = testing::circle_grid();
  const Index cell = grid.walkable_cells[100];
  DistributionField f = DistributionField::Zero(8, grid.n_cells());
  f.col(cell).setConstant(1.0 / 8.0);
  const DensityField rho = density_of(f);
  const StressField eps = StressField::Constant(grid.n_cells(), 0.7);
  const MatrixX<Real> a = table_A(grid, cell);
  const auto tensors = table_B(grid, rho, eps, cell);
  const VectorX<Real> b = b_vector(f, tensors.first, cell);
  const VectorX<Real> terms = interaction_terms(f.col(cell).matrix(), rho[cell], a, b);
  const VectorX<Real> expected = b - f.col(cell).matrix();
  CHECK((terms - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("speed law instantiates across scalar types") {
  CHECK(speed<long double>(0.6L) == Approx(0.5).epsilon(1e-15));
  CHECK(speed<float>(0.1f) == 1.0f);
  // The derivative kernel agrees between double and long double.
  const long double d_ld = blend_dot_derivative<long double>(0.3L, 0.7L, 0.5L, 0.4L);
  const double d_d = blend_dot_derivative(0.3, 0.7, 0.5, 0.4);
  CHECK(std::abs(static_cast<double>(d_ld) - d_d) <= 1e-14);
}

TEST_CASE("congestion ties keep the current direction, walls repel probes") {
  const DirectionSet dirs = DirectionSet::make(8);
  const GeometryGrid box = make_test_box(12, 1, 0.1, 0.1, dirs, false);

  // On a one-cell strip every off-axis probe lands in a wall; at the far
  // end even the forward probe does, so all three candidates tie at
  // +infinity and the current direction wins.
  DensityField rho = DensityField::Constant(box.n_cells(), 0.2);
  const Index last = box.cell_index(12, 1);
  REQUIRE(box.is_walkable(last));
  CHECK(congestion_direction(rho, box, last, 0) == 0);

  // Mid-strip, walking east with rho rising ahead: the diagonal candidates
  // probe walls, so the finite (if unattractive) forward difference wins.
  for (Index c : box.walkable_cells) rho[c] = 0.05 * static_cast<Real>(box.ix_of(c));
  const Index mid = box.cell_index(6, 1);
  CHECK(congestion_direction(rho, box, mid, 0) == 0);
}

TEST_CASE("opposite-direction blend at eps = 1/2 falls back with zero derivative") {
  const DirectionSet dirs = DirectionSet::make(8);
  const BlendTables t = blend_tables(dirs, 0.5);
  // p - q = 4: u_F = -u_C. The value keeps the congestion choice (q relative
  // angle), the derivative is defined as zero there.
  for (Index q = 0; q < 8; ++q) {
    const Index p = dirs.wrap(q + 4);
    CHECK(t.value(p, q) ==
          Approx(direction_tent(angular_distance(dirs.angles[q], 0.0))).epsilon(1e-14));
    CHECK(t.d_eps(p, q) == 0.0);
  }
}
