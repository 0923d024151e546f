#include <cmath>
#include <numeric>

#include "ballistic/dynamics.hpp"
#include "ballistic/potentials.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ballistic;

namespace {

Grid square(int n, double L) { return Grid{n, n, L, L}; }

// Unit-norm Gaussian packet exp(-sigma^2 |x - c|^2 + i k0.x) sampled in position space. Its momentum
// density is proportional to exp(-|k - k0|^2 / (2 sigma^2)).
WaveField gaussian_field(const Grid& g, const Vec2& k0, double sigma, const Vec2& c = {}) {
  WaveField f(g);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const Vec2 x = g.x(i, j);
      const Vec2 d{minimal_image(x.x - c.x, g.L1), minimal_image(x.y - c.y, g.L2)};
      f.values[g.flat(i, j)] = std::exp(-sigma * sigma * d.norm2()) * std::polar(1.0, k0.dot(x));
    }
  }
  const double n = f.norm();
  for (auto& v : f.values) v /= n;
  return f;
}

double max_diff(const WaveField& a, const WaveField& b) {
  double e = 0.0;
  for (std::size_t c = 0; c < a.values.size(); ++c) e = std::max(e, std::abs(a.values[c] - b.values[c]));
  return e;
}

Packet free_packet(const Grid& g, const Vec2& k0, double sigma, GridBranches& branches, MomentumProfile& profile) {
  branches = free_grid_branches(g);
  profile = gaussian_profile(g, k0, sigma);
  const auto eta = build_eta_delta(g, branches.member, 4.0 * g.dk1());
  return synthesize_packet(branches, profile, eta);
}

}  // namespace

TEST_CASE("free second moment grows as X0 + 4 t^2 <|k|^2>") {
  const Grid g = square(128, 64.0);
  const double sigma = 0.35;
  const Vec2 k0{3.0, 0.0};
  const Propagator prop(g);
  WaveField psi = gaussian_field(g, k0, sigma);
  // Oracle for the momentum density exp(-|k - k0|^2 / (2 sigma^2)): <|k|^2> = |k0|^2 + 2 sigma^2,
  // position variance 1 / (4 sigma^2) per axis.
  const double k2 = k0.norm2() + 2.0 * sigma * sigma;
  const double x0 = 1.0 / (2.0 * sigma * sigma);
  MomentRecorder rec;
  prop.run(psi, 0.25, 24, 1, [&rec](const WaveField& f, long s) { rec(f, s); });
  const auto& s = rec.series();
  REQUIRE(s.times.size() == 25);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    const double t = s.times[i];
    worst = std::max(worst, std::fabs(s.values[i] - (x0 + 4.0 * t * t * k2)) / (x0 + 4.0 * t * t * k2));
  }
  CHECK(worst < 1e-9);
  // The packet crossed the box edge (6 t = 36 > L / 2); the unwrapped centroid follows it.
  CHECK(s.centroids.back().x == doctest::Approx(2.0 * k0.x * 6.0).epsilon(1e-9));
  CHECK(std::fabs(s.centroids.back().y) < 1e-9);
  CHECK(!s.any_wrap());
  CHECK(std::fabs(psi.norm2() - 1.0) < 1e-12);
}

TEST_CASE("wrap-risk sentinel flags a packet filling the box") {
  const Grid g = square(64, 32.0);
  const auto wide = gaussian_field(g, {}, 0.1);
  CHECK(outer_mass_fraction(wide, torus_centroid(wide)) >= kWrapRiskThreshold);
  const auto narrow = gaussian_field(g, {}, 0.5);
  CHECK(outer_mass_fraction(narrow, torus_centroid(narrow)) < kWrapRiskThreshold);
  MomentRecorder rec;
  rec(wide, 0);
  CHECK(rec.series().any_wrap());
}

TEST_CASE("centroid and moment helpers") {
  const Grid g = square(64, 32.0);
  const auto f = gaussian_field(g, {}, 0.5, Vec2{15.0, -3.0});
  const Vec2 c = torus_centroid(f);
  CHECK(c.x == doctest::Approx(15.0).epsilon(1e-9));
  CHECK(c.y == doctest::Approx(-3.0).epsilon(1e-9));
  // Variance 1 / (4 sigma^2) per axis about the centroid; the image choice follows the reference.
  CHECK(second_moment(f, c, c) == doctest::Approx(2.0).epsilon(1e-9));
  const double shifted = second_moment(f, Vec2{15.0 - 32.0, -3.0}, c);
  CHECK(shifted == doctest::Approx(2.0 + 32.0 * 32.0).epsilon(1e-9));
}

TEST_CASE("split-step matches an RK4 reference with second-order convergence") {
  const Grid g = square(64, 8.0);
  const auto V = sample_potential(fixtures::one_layer(2.0), g);
  const Propagator prop(g, V.values);
  const auto psi0 = gaussian_field(g, Vec2{2.0, 0.0}, 1.0);
  const double t = 0.5;
  const oracles::IntegratingFactorRk4 rk4(g, V.values);
  const auto ref = rk4.propagate(psi0, t, 250);

  std::vector<double> errors;
  for (long steps : {25L, 50L, 100L}) {
    WaveField psi = psi0;
    prop.run(psi, t / steps, steps);
    errors.push_back(max_diff(psi, ref));
  }
  MESSAGE("split-step errors " << errors[0] << " " << errors[1] << " " << errors[2]);
  CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(errors[2] < 1e-3);

  // The free case is exact for any step: compare against the reference with V = 0.
  const Propagator free_prop(g);
  const oracles::IntegratingFactorRk4 free_rk4(g, {});
  WaveField psi = psi0;
  free_prop.run(psi, t, 1);
  CHECK(max_diff(psi, free_rk4.propagate(psi0, t, 1)) < 1e-12);
}

TEST_CASE("norm, energy and time reversal") {
  const Grid g = square(64, 8.0);
  const auto V = sample_potential(fixtures::one_layer(2.0), g);
  const Propagator prop(g, V.values);
  const auto psi0 = gaussian_field(g, Vec2{2.0, 1.0}, 1.0);
  const double e0 = prop.energy(psi0);
  WaveField psi = psi0;
  prop.run(psi, 0.005, 200);
  CHECK(std::fabs(psi.norm2() - 1.0) < 1e-12);
  CHECK(std::fabs(prop.energy(psi) - e0) / std::fabs(e0) < 1e-3);
  CHECK(psi.time == doctest::Approx(1.0));
  prop.run(psi, -0.005, 200);
  CHECK(max_diff(psi, psi0) < 1e-11);

  // Observation cadence does not change the result beyond round-off.
  WaveField a = psi0, b = psi0;
  int calls = 0;
  prop.run(a, 0.01, 20);
  prop.run(b, 0.01, 20, 3, [&calls](const WaveField&, long) { ++calls; });
  CHECK(calls == 1 + 6 + 1);
  CHECK(max_diff(a, b) < 1e-12);
}

TEST_CASE("propagator input errors") {
  const Grid g = square(32, 8.0);
  CHECK_THROWS_AS(Propagator(g, std::vector<double>(7, 0.0)), InputError);
  const Propagator prop(g);
  WaveField psi = gaussian_field(g, {}, 1.0);
  CHECK_THROWS_AS(prop.run(psi, 0.0, 3), InputError);
  WaveField other(square(16, 8.0));
  CHECK_THROWS_AS(prop.run(other, 0.1, 3), BoxError);
  psi.values[5] = cplx{std::nan(""), 0.0};
  try {
    prop.run(psi, 0.1, 3);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
  CHECK(prop.default_dt() == doctest::Approx(0.2 / (2.0 * std::pow(kPi * 32 / 8.0, 2))));
}

TEST_CASE("resolution check near the Nyquist limit") {
  const Grid g = square(64, 16.0);  // Nyquist 4 pi
  CHECK_NOTHROW(check_resolution(gaussian_field(g, Vec2{6.0, 0.0}, 0.5)));
  CHECK_THROWS_AS(check_resolution(gaussian_field(g, Vec2{12.0, 0.0}, 0.5)), ResolutionError);
}

TEST_CASE("Abel and Cesaro means of t^2") {
  const double T = 0.8;
  std::vector<double> t, f;
  for (int i = 0; i <= 1200; ++i) {
    t.push_back(i * T / 200.0);
    f.push_back(t.back() * t.back());
  }
  // (2/T) int exp(-2t/T) t^2 dt = T^2 / 2; (1/T) int_0^T t^2 dt = T^2 / 3.
  const auto a = abel_mean(t, f, T);
  CHECK(a.value == doctest::Approx(0.5 * T * T).epsilon(1e-3));
  CHECK(a.t_max == doctest::Approx(6.0 * T));
  // For f = t^2 the tail (2/T) int_{6T}^inf exp(-2t/T) t^2 dt = exp(-12) (36 + 6 + 1/2) T^2 is attained.
  CHECK(a.remainder_bound == doctest::Approx(std::exp(-12.0) * 42.5 * T * T).epsilon(1e-9));
  CHECK(cesaro_mean(t, f, T).value == doctest::Approx(T * T / 3.0).epsilon(1e-3));

  const std::vector<double> ones(t.size(), 1.0);
  CHECK(cesaro_mean(t, ones, T).value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(abel_mean(t, ones, T).value == doctest::Approx(1.0 - std::exp(-12.0)).epsilon(1e-4));

  try {
    (void)abel_mean(t, f, 1.0);
    FAIL("expected a coverage error");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("t_max") != std::string::npos);
  }
  CHECK_THROWS_AS(cesaro_mean(t, f, 10.0), RangeError);
  CHECK_THROWS_AS(abel_mean(t, f, -1.0), InputError);
}

TEST_CASE("exponent and quadratic fits") {
  std::vector<double> Ts, quad, power, noisy;
  for (int i = 0; i < 7; ++i) {
    const double T = 0.2 * std::pow(10.0, i / 6.0);
    Ts.push_back(T);
    quad.push_back(3.0 * T * T);
    power.push_back(std::pow(T, 1.6));
    noisy.push_back(3.0 * T * T * (1.0 + 0.01 * ((i % 2) ? 1 : -1)));
  }
  const auto q = fit_exponent(Ts, quad);
  CHECK(q.beta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.band < 1e-10);
  CHECK(fit_exponent(Ts, power).beta == doctest::Approx(0.8).epsilon(1e-12));
  const auto n = fit_exponent(Ts, noisy);
  CHECK(std::fabs(n.beta - 1.0) < n.band);
  CHECK(n.band > 0.0);

  CHECK_THROWS_AS(fit_exponent({1, 2, 3, 4}, {1, 2, 3, 4}), InputError);
  CHECK_THROWS_AS(fit_exponent({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}), InputError);
  CHECK_THROWS_AS(fit_exponent({1, 2, 3, 4, 10}, {1, 2, -3, 4, 5}), InputError);

  std::vector<double> poly;
  for (double T : Ts) poly.push_back(1.5 - 0.25 * T + 4.0 * T * T);
  const auto c = fit_quadratic(Ts, poly);
  CHECK(c[0] == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(c[1] == doctest::Approx(-0.25).epsilon(1e-9));
  CHECK(c[2] == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("free transport check reproduces the group-velocity law") {
  const Grid g = square(256, 128.0);
  const double sigma = 0.35;
  const Vec2 k0{2.0, 0.0};
  GridBranches branches;
  MomentumProfile profile;
  const auto packet = free_packet(g, k0, sigma, branches, profile);
  const Propagator prop(g);
  TransportOptions o;
  o.Ts = {0.2, 0.35, 0.6, 1.1, 2.0};
  o.dt = 0.01;
  const auto rep = ballistic_check(packet, profile, branches, prop, o);
  const double k2 = k0.norm2() + 2.0 * sigma * sigma;
  const double x0 = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < rep.Ts.size(); ++i) {
    const double T = rep.Ts[i];
    CHECK(rep.abel[i] == doctest::Approx(x0 + 2.0 * T * T * k2).epsilon(2e-3));
    CHECK(rep.cesaro[i] == doctest::Approx(x0 + 4.0 / 3.0 * T * T * k2).epsilon(2e-3));
  }
  CHECK(rep.c_gv == doctest::Approx(2.0 * k2).epsilon(1e-6));
  CHECK(rep.coefficient_ratio == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(rep.trusted);
  CHECK(rep.floor_holds);
  REQUIRE(rep.T0.has_value());
  CHECK(*rep.T0 == rep.Ts.front());
  CHECK(rep.norm_drift < 1e-12);
  CHECK(rep.energy_drift < 1e-10);
  CHECK(rep.mask_fraction == doctest::Approx(1.0));
  CHECK(rep.initial_moment == doctest::Approx(x0).epsilon(1e-6));
  CHECK(rep.upper_bound_holds);
  CHECK(rep.momentum_width == doctest::Approx(std::sqrt(2.0) * sigma).epsilon(1e-6));
  MESSAGE("beta abel " << rep.fit_abel.beta << " +- " << rep.fit_abel.band << ", cesaro " << rep.fit_cesaro.beta
                       << " +- " << rep.fit_cesaro.band);
}

TEST_CASE("front profile of a free Gaussian peaks at 2 |k0|") {
  const Grid g = square(512, 256.0);
  const double sigma = 0.35;
  const Vec2 k0{3.0, 0.0};
  GridBranches branches;
  MomentumProfile profile;
  const auto packet = free_packet(g, k0, sigma, branches, profile);
  const Propagator prop(g);
  const Vec2 x0 = torus_centroid(packet.field);
  const double width = std::sqrt(second_moment(packet.field, x0, x0));
  WaveField psi = packet.field;
  CHECK_THROWS_AS(front_profile(psi, x0, width, branches, packet.amplitudes, 0.5), InputError);  // t = 0
  prop.run(psi, 0.1, 2);
  try {
    (void)front_profile(psi, x0, width, branches, packet.amplitudes, 0.5);
    FAIL("expected a pre-asymptotic error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("pre-asymptotic") != std::string::npos);
  }
  prop.run(psi, 7.8, 1);
  const auto fp = front_profile(psi, x0, width, branches, packet.amplitudes, 0.5);
  const int expected = static_cast<int>(2.0 * k0.norm() / 0.5);
  MESSAGE("peak bins measured " << fp.peak_bin_measured << ", predicted " << fp.peak_bin_predicted);
  CHECK(std::abs(fp.peak_bin_measured - expected) <= 1);
  CHECK(std::abs(fp.peak_bin_predicted - expected) <= 1);
  CHECK(fp.mass_in_band > 0.99);
  double sm = 0.0, sp = 0.0;
  for (const auto& r : fp.rows) {
    sm += r.measured;
    sp += r.predicted;
  }
  CHECK(sm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fp.rows[expected].k0 == doctest::Approx(0.5 * (expected + 0.5) * 0.5).epsilon(0.05));
}

TEST_CASE("stationary radius inverts the group speed") {
  LimitPeriodicPotential free;
  const BranchSolver free_solver(free.series_for_layers(0, 0), BlochOptions{});
  CHECK(stationary_radius(free_solver, Vec2{1.0, 1.0}, 7.0, 2.0) == doctest::Approx(3.5).epsilon(1e-10));
  const BranchSolver weak(fixtures::one_layer(0.02).series(1), BlochOptions{});
  const double r = stationary_radius(weak, Vec2{std::cos(0.3), std::sin(0.3)}, 11.0, 5.0);
  CHECK(std::fabs(r - 5.5) < 0.01);
  CHECK_THROWS_AS(stationary_radius(free_solver, Vec2{}, 7.0, 2.0), InputError);
}
