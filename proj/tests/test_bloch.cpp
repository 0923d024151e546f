#include <cmath>
#include <random>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ballistic;

namespace {

const DispersionPoint& point_of(const BranchResult& r) {
  REQUIRE(std::holds_alternative<DispersionPoint>(r));
  return std::get<DispersionPoint>(r);
}

BlochMatrix raw_matrix(const Eigen::MatrixXcd& H) {
  BlochMatrix m;
  m.H = H;
  return m;
}

// Random non-resonant quasimomenta in the annulus 4 <= |k| <= 8.
std::vector<std::pair<Vec2, DispersionPoint>> annulus_points(const BranchSolver& solver, int count,
                                                             unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(4.0, 8.0), angle(0.0, kTwoPi);
  std::vector<std::pair<Vec2, DispersionPoint>> out;
  while (static_cast<int>(out.size()) < count) {
    const double r = radius(rng), a = angle(rng);
    const Vec2 k{r * std::cos(a), r * std::sin(a)};
    const auto res = solver.solve(k);
    if (const auto* p = std::get_if<DispersionPoint>(&res)) out.emplace_back(k, *p);
  }
  return out;
}

}  // namespace

TEST_CASE("free matrix is diagonal and its branch is the plane wave") {
  LimitPeriodicPotential free;
  const Vec2 k{1.3, -0.4};
  const auto m = assemble_bloch_matrix(free.series_for_layers(0, 0), k, 10.0);
  CHECK(m.size() > 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) {
        CHECK(m.diagonal(i) == doctest::Approx((k + m.lattice->vectors[i]).norm2()));
      } else {
        CHECK(m.H(i, j) == cplx{0.0, 0.0});
      }
    }
  }
  const auto p = point_of(select_plane_wave_branch(solve_dense(m), m, 0.9));
  CHECK(p.lambda == doctest::Approx(k.norm2()).epsilon(1e-14));
  CHECK(p.weight == doctest::Approx(1.0));
  CHECK(p.grad.x == doctest::Approx(2.0 * k.x));
  CHECK(p.grad.y == doctest::Approx(2.0 * k.y));
  const auto rec = solve_recursive(m);
  CHECK(rec.iterations == 1);
  CHECK(rec.lambda == doctest::Approx(k.norm2()));
  const auto decay = coefficient_decay_profile(rec, 0);
  CHECK(decay.l1 == doctest::Approx(1.0));
  CHECK(decay.inner_sum == 0.0);
}

TEST_CASE("hand-assembled 3x3 matrix for a single cosine") {
  LimitPeriodicPotential p;
  PeriodicLayer layer;
  layer.coefficients[{1, 0}] = {0.3, 0.1};
  layer.coefficients[{-1, 0}] = {0.3, -0.1};
  p.layers.push_back(layer);
  const auto V = p.series(1);
  const double K = kTwoPi + 0.1;
  const auto m = assemble_bloch_matrix(V, {0.0, 0.0}, K, 1);
  REQUIRE(m.size() == 3);
  const cplx v{0.3, 0.1};
  const double e = kTwoPi * kTwoPi;
  // Basis order: 0, then (-1,0), (1,0) (equal length, label order).
  Eigen::MatrixXcd expected(3, 3);
  // H(r, r') = W(p_r - p_r'): row (-1,0) couples to 0 through W(-1) = conj(v).
  expected << 0.0, v, std::conj(v),
              std::conj(v), e, 0.0,
              v, 0.0, e;
  CHECK(m.lattice->labels[1] == ModeLabel{-1, 0, 0, 0});
  CHECK((m.H - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(assemble_bloch_matrix(V, {0.0, 0.0}, kTwoPi - 0.1, 1), InputError);
  auto broken = V;
  broken.coefficients[{1, 0, 0, 0}] = {0.4, 0.1};
  CHECK_THROWS_AS(assemble_bloch_matrix(broken, {0.0, 0.0}, K, 1), InputError);
}

TEST_CASE("quasi-periodic matrix is Hermitian") {
  const auto q = fixtures::quasi_nonseparable(0.05);
  const auto m = assemble_bloch_matrix(q, {0.0, 0.0}, 8.0, 3);
  CHECK(m.size() > 1);
  CHECK(m.hermiticity_residual() < 1e-12);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m.lattice->index.count(-m.lattice->labels[i]) == 1);
  }
  CHECK_THROWS_AS(assemble_bloch_matrix(q.series(), {0.0, 0.0}, 8.0, 0), InputError);
}

TEST_CASE("solve_dense: closed forms and reconstruction") {
  SUBCASE("diagonal") {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(3, 3);
    H(0, 0) = 3.0;
    H(1, 1) = -1.0;
    H(2, 2) = 2.0;
    const auto pairs = solve_dense(raw_matrix(H));
    CHECK(pairs.values(0) == doctest::Approx(-1.0));
    CHECK(pairs.values(1) == doctest::Approx(2.0));
    CHECK(pairs.values(2) == doctest::Approx(3.0));
    CHECK(std::abs(pairs.vectors(1, 0)) == doctest::Approx(1.0));
  }
  SUBCASE("2x2") {
    const double a = 1.5, c = -0.25;
    const cplx b{0.3, -0.7};
    Eigen::MatrixXcd H(2, 2);
    H << a, b, std::conj(b), c;
    const auto pairs = solve_dense(raw_matrix(H));
    const double root = std::sqrt((a - c) * (a - c) + 4.0 * std::norm(b));
    CHECK(pairs.values(0) == doctest::Approx(((a + c) - root) / 2.0).epsilon(1e-14));
    CHECK(pairs.values(1) == doctest::Approx(((a + c) + root) / 2.0).epsilon(1e-14));
  }
  SUBCASE("random Hermitian 50x50") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    Eigen::MatrixXcd A(50, 50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j) A(i, j) = {n01(rng), n01(rng)};
    const Eigen::MatrixXcd H = (A + A.adjoint()) / 2.0;
    const auto pairs = solve_dense(raw_matrix(H));
    const Eigen::MatrixXcd R = pairs.vectors * pairs.values.asDiagonal() * pairs.vectors.adjoint();
    CHECK((R - H).cwiseAbs().maxCoeff() < 1e-9);
    const double norm = H.norm();
    for (int j = 0; j < 50; ++j) {
      CHECK((H * pairs.vectors.col(j) - pairs.values(j) * pairs.vectors.col(j)).norm() <= 1e-10 * norm);
    }
    CHECK_THROWS_AS(solve_dense(raw_matrix(H), 49), RangeError);
  }
}

TEST_CASE("weak coupling: branch near |k|^2 matches second-order perturbation") {
  const auto pot = fixtures::one_layer(0.01);
  BranchSolver solver(pot.series(1), {});
  const Vec2 k{5.3, 3.1};  // |k| ~ 6.1, away from Bragg planes
  const auto m = solver.matrix(k);
  const auto p = point_of(solver.solve(k));
  CHECK(p.weight > 0.99);
  const double oracle = oracles::second_order_eigenvalue(m);
  const double g = 0.01 * 0.5;  // largest coefficient
  CHECK(std::fabs(p.lambda - oracle) <= 10.0 * g * g * g / (p.gap * p.gap));
  CHECK(std::fabs(p.lambda - k.norm2()) <= 0.01 * 2.0 + 1.0 * g * g / p.gap);
}

TEST_CASE("Bragg plane is resonant for both solvers") {
  const auto pot = fixtures::one_layer(0.05);
  BranchSolver solver(pot.series(1), {});
  const Vec2 k{-kPi, 5.0};  // |k + (2 pi, 0)| = |k|
  const auto r = solver.solve(k);
  REQUIRE(std::holds_alternative<ResonantFlag>(r));
  CHECK(std::get<ResonantFlag>(r).weight < 0.9);
  CHECK(std::get<ResonantFlag>(r).gap < 1e-12);
  CHECK_THROWS_AS(solve_recursive(solver.matrix(k)), NonConvergent);
}

TEST_CASE("recursive solver reproduces the dense branch") {
  for (double g : {0.01, 0.05}) {
    BranchSolver solver(fixtures::one_layer(g).series(1), {});
    for (const auto& [k, dense] : annulus_points(solver, 25, 11)) {
      const auto rec = solve_recursive(solver.matrix(k));
      CHECK(std::fabs(rec.lambda - dense.lambda) < 1e-8 * k.norm2());
      double d2 = 0.0;
      for (std::size_t r = 0; r < rec.coefficients.size(); ++r) {
        d2 += std::norm(rec.coefficients[r] - dense.coefficients[r]);
      }
      CHECK(std::sqrt(d2) < 1e-6);
      CHECK(dense.l1_unit_c0() < 2.0);
    }
  }
}

TEST_CASE("Hellmann-Feynman gradient matches finite differences") {
  BranchSolver solver(fixtures::one_layer(0.05).series(1), {});
  for (const auto& [k, p] : annulus_points(solver, 10, 23)) {
    const double K = solver.cutoff_for(k) + 1.0;
    const auto fixed = point_of(solver.solve(k, K));
    const Vec2 fd = oracles::finite_difference_gradient(solver, k, K);
    CHECK((fd - fixed.grad).norm() / fixed.grad.norm() < 1e-4);
    CHECK(fixed.grad.norm() >= k.norm());
  }
  DispersionPoint bad = point_of(solver.solve({6.0, 0.3}));
  bad.coefficients[0] *= 2.0;
  CHECK_THROWS_AS(grad_lambda(bad), NumericError);
}

TEST_CASE("coefficient decay: inner sums shrink with |k|") {
  // Base period 4 puts dual-lattice points inside the disk |k + p| < |k|/4.
  BranchSolver solver(fixtures::one_layer(0.01, 4.0).series(1), {});
  const Vec2 dir = Vec2{1.0, 0.4142} * (1.0 / std::hypot(1.0, 0.4142));
  std::vector<std::pair<double, double>> samples;
  double previous = std::numeric_limits<double>::infinity();
  for (double kn : {4.0, 8.0, 16.0}) {
    const Vec2 k = dir * kn;
    const auto p = solve_recursive(solver.matrix(k));
    const auto d = coefficient_decay_profile(p, 0);
    CHECK(d.inner_count > 0);
    CHECK(d.inner_sum > 0.0);
    CHECK(d.inner_sum < previous);
    CHECK(d.l1 < 2.0);
    previous = d.inner_sum;
    samples.emplace_back(kn, d.inner_sum);
  }
  CHECK(fit_decay_power(samples) > 0.0);
  CHECK_THROWS_AS(fit_decay_power({{4.0, 1.0}}), InputError);
}

TEST_CASE("translation covariance") {
  const auto pot = fixtures::three_layers(0.05);
  const Vec2 k{5.1, 2.7};
  const auto base = solve_recursive(assemble_bloch_matrix(pot, 2, k, 16.0));
  for (const Vec2 shift : {Vec2{2.0, 0.0}, Vec2{0.37, -1.21}}) {
    const auto moved = solve_recursive(assemble_bloch_matrix(pot.translated(shift), 2, k, 16.0));
    CHECK(std::fabs(moved.lambda - base.lambda) < 1e-10);
    for (std::size_t r = 0; r < base.coefficients.size(); ++r) {
      CHECK(std::fabs(std::abs(moved.coefficients[r]) - std::abs(base.coefficients[r])) < 1e-10);
    }
  }
}

TEST_CASE("telescoping: consecutive approximants converge") {
  const auto pot = fixtures::three_layers(0.05);
  const Vec2 k{5.1, 2.7};
  const double K = 16.0;
  std::vector<DispersionPoint> levels;
  for (int n = 1; n <= 3; ++n) levels.push_back(solve_recursive(assemble_bloch_matrix(pot, n, k, K)));
  // Embed level-n coefficients into the level-3 lattice (labels scale by 2^{3-n}).
  auto embedded = [&](int n) {
    std::map<ModeLabel, cplx> out;
    const auto& p = levels[static_cast<std::size_t>(n - 1)];
    const std::int64_t f = std::int64_t{1} << (3 - n);
    for (std::size_t r = 0; r < p.coefficients.size(); ++r) out[scaled(p.lattice->labels[r], f)] = p.coefficients[r];
    return out;
  };
  auto distance = [](const std::map<ModeLabel, cplx>& a, const std::map<ModeLabel, cplx>& b) {
    double s = 0.0;
    for (const auto& [l, v] : a) {
      const auto it = b.find(l);
      s += std::norm(v - (it == b.end() ? cplx{} : it->second));
    }
    for (const auto& [l, v] : b) {
      if (!a.count(l)) s += std::norm(v);
    }
    return std::sqrt(s);
  };
  const double d12 = distance(embedded(1), embedded(2));
  const double d23 = distance(embedded(2), embedded(3));
  CHECK(d12 > 0.0);
  CHECK(d23 < d12);
}
