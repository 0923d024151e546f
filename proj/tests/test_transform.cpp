#include <cmath>
#include <random>

#include "ballistic/bloch.hpp"
#include "ballistic/fft.hpp"
#include "ballistic/transform.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace ballistic;

namespace {

Grid grid64() { return Grid{64, 64, 16.0, 16.0}; }

GridBranches one_layer_branches(double g, const Grid& grid, double theta = 0.9) {
  GridBranchOptions o;
  o.theta = theta;
  return build_grid_branches(fixtures::one_layer(g).series(1), grid, o);
}

WaveField random_field(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  WaveField F(g);
  for (auto& v : F.values) v = {n(rng), n(rng)};
  return F;
}

double sup_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Brute-force continuum Fourier coefficient (1/2pi) sum_x F(x) exp(-i k.x) dA.
cplx direct_fourier(const WaveField& F, const Vec2& k) {
  const Grid& g = F.grid;
  cplx s{0.0, 0.0};
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const double ph = -k.dot(g.x(i, j));
      s += F.values[g.flat(i, j)] * cplx{std::cos(ph), std::sin(ph)};
    }
  }
  return s * g.cell_area() / kTwoPi;
}

// Grid Hamiltonian of the propagator: FFT kinetic |k|^2 plus multiplication by the sampled V.
std::vector<cplx> apply_grid_hamiltonian(const WaveField& psi, const PotentialField& V) {
  const Grid& g = psi.grid;
  std::vector<cplx> hat = psi.values;
  Fft2 fft(g.n1, g.n2);
  fft.forward(hat);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) hat[g.flat(i, j)] *= g.k(i, j).norm2() / static_cast<double>(g.size());
  }
  fft.backward(hat);
  for (std::size_t c = 0; c < hat.size(); ++c) hat[c] += V.values[c] * psi.values[c];
  return hat;
}

}  // namespace

TEST_CASE("free analysis is the continuum Fourier transform") {
  const Grid g{16, 16, 8.0, 4.0};
  const auto b = free_grid_branches(g);
  std::mt19937_64 rng(7);
  const auto F = random_field(g, rng);
  const auto t = analyze(b, F);
  double err = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) err = std::max(err, std::abs(t[g.flat(i, j)] - direct_fourier(F, g.k(i, j))));
  }
  CHECK(err < 1e-12);
  // S is the inverse on the full grid.
  const auto back = synthesize(b, t);
  CHECK(sup_diff(back.values, F.values) < 1e-12);
}

TEST_CASE("free spike synthesizes a normalized plane wave") {
  const Grid g = grid64();
  const auto b = free_grid_branches(g);
  const Vec2 k0{3 * g.dk1(), -5 * g.dk2()};
  const auto profile = spike_profile(g, k0);
  const auto eta = build_eta_delta(g, std::vector<char>(g.size(), 1), 2.0 * g.dk1());
  const auto p = synthesize_packet(b, profile, eta);
  double err = 0.0;
  const double amp = 1.0 / std::sqrt(g.L1 * g.L2);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const double ph = k0.dot(g.x(i, j));
      err = std::max(err, std::abs(p.field.values[g.flat(i, j)] - amp * cplx{std::cos(ph), std::sin(ph)}));
    }
  }
  CHECK(err < 1e-13);
  CHECK(p.field.norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("free Gaussian packet has position variance 1/(2 sigma^2)") {
  const Grid g{128, 128, 64.0, 64.0};
  const auto b = free_grid_branches(g);
  const double sigma = 0.5;
  const auto profile = gaussian_profile(g, {2.0, 1.0}, sigma);
  const auto eta = build_eta_delta(g, std::vector<char>(g.size(), 1), 2.0 * g.dk1());
  const auto p = synthesize_packet(b, profile, eta);
  double var = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) var += g.x(i, j).norm2() * std::norm(p.field.values[g.flat(i, j)]);
  }
  var *= g.cell_area();
  CHECK(var == doctest::Approx(1.0 / (2.0 * sigma * sigma)).epsilon(1e-6));
  // Decay metadata is finite for every order up to 6.
  for (double d : profile.decay) CHECK(std::isfinite(d));
}

TEST_CASE("coset branches are eigenvectors of the propagator's grid Hamiltonian") {
  const Grid g = grid64();
  const auto V = fixtures::one_layer(0.05).series(1);
  const auto b = build_grid_branches(V, g);
  CHECK(b.stride1 == 16);
  CHECK(b.block1 == 4);
  const auto field = sample_series(V, g, true);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  int checked = 0;
  while (checked < 10) {
    const std::size_t k = pick(rng);
    if (!b.member[k]) continue;
    std::vector<cplx> f(g.size(), cplx{0.0, 0.0});
    f[k] = 1.0;
    const auto psi = synthesize(b, f);
    const auto h = apply_grid_hamiltonian(psi, field);
    double res = 0.0, nrm = 0.0;
    for (std::size_t c = 0; c < h.size(); ++c) {
      res += std::norm(h[c] - b.lambda[k] * psi.values[c]);
      nrm += std::norm(psi.values[c]);
    }
    CHECK(std::sqrt(res / nrm) < 1e-10 * std::max(1.0, b.lambda[k]));
    ++checked;
  }
}

TEST_CASE("coset branch agrees with the plane-wave Galerkin branch") {
  // Larger box-to-period ratio keeps the coset wide enough to contain the relevant couplings.
  const Grid g{256, 256, 16.0, 16.0};
  const auto V = fixtures::one_layer(0.05).series(1);
  const auto b = build_grid_branches(V, g);
  const BranchSolver solver(V, BlochOptions{});
  int checked = 0;
  for (int i = 0; i < g.n1 && checked < 20; i += 3) {
    for (int j = 0; j < g.n2 && checked < 20; j += 5) {
      const Vec2 k = g.k(i, j);
      if (k.norm() < 3.0 || k.norm() > 8.0 || !b.member[g.flat(i, j)]) continue;
      const auto r = solver.solve(k);
      if (!std::holds_alternative<DispersionPoint>(r)) continue;
      CHECK(std::fabs(std::get<DispersionPoint>(r).lambda - b.lambda[g.flat(i, j)]) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 20);
}

TEST_CASE("round trip, contraction and linearity at small coupling") {
  const Grid g = grid64();
  const auto b = one_layer_branches(0.05, g);
  // L / P = 16 is even, so the Bragg lines k_x, k_y in pi Z are grid lines and resonant.
  CHECK(b.member_fraction() > 0.6);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);

  std::vector<cplx> f(g.size(), cplx{0.0, 0.0});
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (b.member[k]) f[k] = {n(rng), n(rng)};
  }
  const auto back = analyze(b, synthesize(b, f));
  CHECK(sup_diff(back, f) < 1e-12 * (1.0 + k_norm(g, f)));
  CHECK(synthesize(b, f).norm() == doctest::Approx(k_norm(g, f)).epsilon(1e-12));

  for (int trial = 0; trial < 20; ++trial) {
    const auto F = random_field(g, rng);
    CHECK(k_norm(g, analyze(b, F)) <= F.norm() * (1.0 + 1e-12));
  }

  const auto F1 = random_field(g, rng), F2 = random_field(g, rng);
  const cplx a{0.3, -1.7};
  WaveField mix(g);
  for (std::size_t c = 0; c < mix.values.size(); ++c) mix.values[c] = F1.values[c] + a * F2.values[c];
  const auto t1 = analyze(b, F1), t2 = analyze(b, F2), tm = analyze(b, mix);
  std::vector<cplx> lin(g.size());
  for (std::size_t c = 0; c < lin.size(); ++c) lin[c] = t1[c] + a * t2[c];
  CHECK(sup_diff(tm, lin) < 1e-12 * (1.0 + k_norm(g, lin)));
}

TEST_CASE("Parseval defect on full and partial windows") {
  const Grid g = grid64();
  std::mt19937_64 rng(5);
  auto F = random_field(g, rng);
  const double nf = F.norm();
  for (auto& v : F.values) v /= nf;
  const auto free = free_grid_branches(g);
  std::vector<char> full(g.size(), 1), half(g.size(), 0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) half[g.flat(i, j)] = g.k(i, j).x >= 0.0;
  }
  CHECK(parseval_defect(free, F, full) < 1e-10);
  CHECK(parseval_defect(free, F, half) < 1e-10);
  for (double coupling : {0.01, 0.05}) {
    const auto b = one_layer_branches(coupling, g);
    const double d = parseval_defect(b, F, b.member);
    MESSAGE("g = " << coupling << ": Parseval defect " << d << ", c = " << d / coupling);
    CHECK(d <= 1e-10);
  }
}

TEST_CASE("packet closeness to the free synthesis") {
  const Grid g{128, 128, 32.0, 32.0};
  const auto b = one_layer_branches(0.05, g);
  const auto free = free_grid_branches(g);
  const auto profile = gaussian_profile(g, {6.0, 0.0}, 0.35);
  const auto eta = build_eta_delta(g, b.member, 4.0 * g.dk1());
  std::vector<cplx> f(g.size());
  double l1 = 0.0;
  std::vector<char> support(g.size(), 0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = profile.values[k] * eta.values[k];
    l1 += std::abs(f[k]) * g.dk_area();
    support[k] = f[k] != cplx{0.0, 0.0};
  }
  const auto psi = synthesize(b, f);
  const auto psi0 = synthesize(free, f);
  const double sup = sup_diff(psi.values, psi0.values);
  const double bound = fourier_closeness(b, support, 1).bound * l1 / kTwoPi;
  MESSAGE("sup |Psi_n - Psi_0| = " << sup << ", bound " << bound);
  CHECK(sup <= bound);
  CHECK(sup > 0.0);
}

TEST_CASE("eta_delta: trivial masks, sandwich and ramp shape") {
  const Grid g{128, 128, 64.0, 64.0};
  const double dk = g.dk1();
  const std::vector<char> full(g.size(), 1), empty(g.size(), 0);
  // A full dual grid still erodes at the band edge; interior cells are exactly 1.
  const auto eta_full = build_eta_delta(g, full, 4 * dk);
  CHECK(eta_full.values[g.flat(0, 0)] == 1.0);
  const auto eta_empty = build_eta_delta(g, empty, 4 * dk);
  for (double v : eta_empty.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(build_eta_delta(g, full, 1.5 * dk), ResolutionError);

  std::vector<char> half(g.size(), 0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) half[g.flat(i, j)] = g.k(i, j).x >= 0.0;
  }
  double c_min = 1e300, c_max = 0.0;
  for (int cells : {4, 8, 16}) {
    const double delta = cells * dk;
    const auto eta = build_eta_delta(g, half, delta);
    const auto inner = erode_mask(g, half, delta);
    const auto outer = dilate_mask(g, half, delta);
    bool sandwich = true;
    for (std::size_t c = 0; c < g.size(); ++c) {
      sandwich &= eta.values[c] >= 0.0 && eta.values[c] <= 1.0;
      if (inner[c]) sandwich &= eta.values[c] == 1.0;
      if (!outer[c]) sandwich &= eta.values[c] == 0.0;
      if (!half[c]) sandwich &= eta.values[c] == 0.0;
    }
    CHECK(sandwich);
    // Ramp along k_x on the k_y = 0 row: monotone, rising from 0 to 1 over about delta.
    double prev = -1.0, last_zero = 0.0, first_one = 0.0;
    bool monotone = true, found_one = false;
    for (int s = -g.n1 / 2; s < g.n1 / 2; ++s) {
      const double v = eta.values[g.flat(Grid::wrap_index(s, g.n1), 0)];
      if (s > 40) break;
      monotone &= v >= prev;
      prev = v;
      if (v == 0.0) last_zero = s * dk;
      if (v == 1.0 && !found_one) {
        first_one = s * dk;
        found_one = true;
      }
    }
    CHECK(monotone);
    CHECK(found_one);
    CHECK(std::fabs((first_one - last_zero) - delta) <= dk * (1.0 + 1e-9));
    const double c = eta.grad_sup_times_delta();
    MESSAGE(cells << " cells: sup|grad eta| * delta = " << c);
    c_min = std::min(c_min, c);
    c_max = std::max(c_max, c);
  }
  // The continuum value is 2 * 256 / 315 / (pi / 5) = 2.587 (peak of the normalized bump marginal).
  CHECK(c_max / c_min < 1.25);
  CHECK(c_min > 2.0);
  CHECK(c_max < 3.2);
}

TEST_CASE("Fourier closeness scales with the coupling and respects the bound") {
  const Grid g = grid64();
  const auto free = free_grid_branches(g);
  const auto zero = fourier_closeness(free, free.member, 42);
  CHECK(zero.estimate == 0.0);
  CHECK(zero.bound == 0.0);
  double est[2];
  int slot = 0;
  for (double coupling : {0.01, 0.05}) {
    const auto b = one_layer_branches(coupling, g);
    // A fixed resonance-gap window keeps the estimate away from the coupling-dependent edge.
    const auto window = b.members_with_gap(4.0);
    const auto rep = fourier_closeness(b, window, 42);
    MESSAGE("g = " << coupling << ": estimate " << rep.estimate << ", exact " << rep.exact << ", bound "
                   << rep.bound);
    CHECK(rep.iterations >= 20);
    CHECK(rep.estimate <= rep.exact * (1.0 + 1e-9));
    CHECK(rep.exact <= rep.bound * (1.0 + 1e-12));
    CHECK(rep.estimate >= 0.9 * rep.exact);
    est[slot++] = rep.estimate;
  }
  CHECK(est[1] / est[0] == doctest::Approx(5.0).epsilon(0.1));
  // Same seed, same answer.
  const auto b = one_layer_branches(0.05, g);
  CHECK(fourier_closeness(b, b.member, 9).estimate == fourier_closeness(b, b.member, 9).estimate);
}

TEST_CASE("c1 constant") {
  const Grid g{128, 128, 40.0, 40.0};
  const std::vector<char> full(g.size(), 1), empty(g.size(), 0);
  const double sigma = 0.5;
  const auto profile = gaussian_profile(g, {6.0, 0.0}, sigma);
  // Gaussian moment integral: int |k|^2 exp(-|k - k0|^2 / (2 sigma^2)) dk = (|k0|^2 + 2 sigma^2) 2 pi sigma^2.
  const double analytic = (36.0 + 2.0 * sigma * sigma) * kTwoPi * sigma * sigma / 160.0;
  CHECK(c1_constant(profile, full, 1.0) == doctest::Approx(analytic).epsilon(0.01));
  CHECK(c1_constant(profile, empty, 1.0) == 0.0);

  // Scaling: rescale so that sum dk |k|^2 |phi|^2 = 160.
  const double raw = 160.0 * c1_constant(profile, full, 1.0);
  CHECK(c1_constant(profile, full, std::sqrt(raw / 160.0)) == doctest::Approx(1.0).epsilon(1e-12));

  // Monotone under mask growth and pointwise amplitude growth.
  std::vector<char> part(g.size(), 0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) part[g.flat(i, j)] = g.k(i, j).y > 0.0;
  }
  CHECK(c1_constant(profile, part) < c1_constant(profile, full));
  auto bigger = profile;
  for (auto& v : bigger.values) v *= 1.5;
  CHECK(c1_constant(bigger, part) > c1_constant(profile, part));
}

TEST_CASE("group-velocity constant of a free packet") {
  const Grid g{128, 128, 40.0, 40.0};
  const auto b = free_grid_branches(g);
  const auto profile = gaussian_profile(g, {6.0, 0.0}, 0.5);
  // Free branch: |grad lambda|^2 = 4 |k|^2, so C_gv = 2 <|k|^2> = 2 (|k0|^2 + 2 sigma^2).
  CHECK(group_velocity_constant(b, profile.values) == doctest::Approx(2.0 * (36.0 + 0.5)).epsilon(1e-6));
  CHECK(mean_k2(g, profile.values) == doctest::Approx(36.5).epsilon(1e-6));
}

TEST_CASE("transform errors") {
  const Grid g = grid64();
  const auto b = one_layer_branches(0.05, g);
  // Incommensurate box.
  CHECK_THROWS_AS(build_grid_branches(fixtures::one_layer(0.05).series(1), Grid{64, 64, 16.5, 16.0}),
                  BoxError);
  // Stride that does not divide the resolution.
  CHECK_THROWS_AS(build_grid_branches(fixtures::one_layer(0.05).series(1), Grid{64, 64, 12.0, 16.0}),
                  BoxError);
  // Quasi-periodic potentials have no commensurate box.
  CHECK_THROWS_AS(build_grid_branches(fixtures::quasi_nonseparable(0.05).series(), g), BoxError);
  // Frequencies at the Nyquist limit.
  CHECK_THROWS_AS(build_grid_branches(fixtures::one_layer(0.05).series(1), Grid{32, 32, 16.0, 16.0}),
                  ResolutionError);
  // Empty packet and packets touching resonant cells.
  const auto eta = build_eta_delta(g, b.member, 2.0 * g.dk1());
  MomentumProfile zero;
  zero.grid = g;
  zero.values.assign(g.size(), cplx{0.0, 0.0});
  CHECK_THROWS_WITH_AS(synthesize_packet(b, zero, eta), "empty packet", InputError);
  const auto ones = build_eta_delta(g, std::vector<char>(g.size(), 1), 2.0 * g.dk1());
  CHECK_THROWS_AS(synthesize_packet(b, gaussian_profile(g, {kPi, 0.0}, 0.5), ones), InputError);
  // Mismatched field grid.
  CHECK_THROWS_AS(analyze(b, WaveField(Grid{64, 64, 32.0, 16.0})), BoxError);
}
