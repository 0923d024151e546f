#include "ballistic/dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ballistic {

namespace {

constexpr double kEdgeFraction = 0.95;
constexpr double kEdgeTolerance = 1e-6;
constexpr double kOuterAnnulus = 0.45;

bool same_grid(const Grid& a, const Grid& b) {
  return a.n1 == b.n1 && a.n2 == b.n2 && a.L1 == b.L1 && a.L2 == b.L2;
}

// Row and column sums of |psi|^2 dA.
struct Marginals {
  std::vector<double> m1, m2;
  double total{0.0};
};

Marginals marginals(const WaveField& psi) {
  const Grid& g = psi.grid;
  Marginals m;
  m.m1.assign(g.n1, 0.0);
  m.m2.assign(g.n2, 0.0);
  const double dA = g.cell_area();
  for (int i = 0; i < g.n1; ++i) {
    const cplx* row = psi.values.data() + g.flat(i, 0);
    double s = 0.0;
    for (int j = 0; j < g.n2; ++j) {
      const double r = std::norm(row[j]) * dA;
      s += r;
      m.m2[j] += r;
    }
    m.m1[i] = s;
    m.total += s;
  }
  return m;
}

double axis_coordinate(int j, int n, double L) { return Grid::signed_index(j, n) * L / n; }

double circular_mean(const std::vector<double>& m, double L) {
  const int n = static_cast<int>(m.size());
  double s = 0.0, c = 0.0;
  for (int j = 0; j < n; ++j) {
    const double th = kTwoPi * axis_coordinate(j, n, L) / L;
    s += m[j] * std::sin(th);
    c += m[j] * std::cos(th);
  }
  if (s == 0.0 && c == 0.0) return 0.0;
  return minimal_image(L * std::atan2(s, c) / kTwoPi, L);
}

// sum_j m_j (x_j* - center)^2 with x_j* the image nearest `reference`.
double axis_moment(const std::vector<double>& m, double L, double center, double reference) {
  const int n = static_cast<int>(m.size());
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = reference + minimal_image(axis_coordinate(j, n, L) - reference, L);
    s += m[j] * (x - center) * (x - center);
  }
  return s;
}

std::vector<char> outer_axis(int n, double L, double reference) {
  std::vector<char> out(n);
  for (int j = 0; j < n; ++j) {
    out[j] = std::fabs(minimal_image(axis_coordinate(j, n, L) - reference, L)) > kOuterAnnulus * L;
  }
  return out;
}

double outer_fraction(const WaveField& psi, const Marginals& m, const Vec2& reference) {
  const Grid& g = psi.grid;
  if (!(m.total > 0.0)) return 0.0;
  const auto o1 = outer_axis(g.n1, g.L1, reference.x);
  const auto o2 = outer_axis(g.n2, g.L2, reference.y);
  double a = 0.0, b = 0.0, both = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    if (o1[i]) a += m.m1[i];
  }
  for (int j = 0; j < g.n2; ++j) {
    if (o2[j]) b += m.m2[j];
  }
  const double dA = g.cell_area();
  for (int i = 0; i < g.n1; ++i) {
    if (!o1[i]) continue;
    for (int j = 0; j < g.n2; ++j) {
      if (o2[j]) both += std::norm(psi.values[g.flat(i, j)]) * dA;
    }
  }
  return (a + b - both) / m.total;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void require_samples(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() != values.size() || times.size() < 2) {
    throw InputError("moment series needs at least two samples with matching times");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InputError("moment series times must increase");
  }
  if (std::fabs(times.front()) > 1e-12) throw InputError("moment series must start at t = 0");
}

double interpolate(const std::vector<double>& t, const std::vector<double>& f, double x) {
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  if (it == t.begin()) return f.front();
  if (it == t.end()) return f.back();
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * f[i - 1] + w * f[i];
}

// Trapezoid integral of weight(t) f(t) over [0, upper] using the samples plus the interpolated
// endpoint.
template <class Weight>
double trapezoid(const std::vector<double>& t, const std::vector<double>& f, double upper, Weight weight) {
  double sum = 0.0;
  double t_prev = t.front();
  double g_prev = weight(t_prev) * f.front();
  for (std::size_t i = 1; i < t.size() && t_prev < upper; ++i) {
    double ti = t[i];
    double fi = f[i];
    if (ti > upper) {
      fi = interpolate(t, f, upper);
      ti = upper;
    }
    const double gi = weight(ti) * fi;
    sum += 0.5 * (ti - t_prev) * (gi + g_prev);
    t_prev = ti;
    g_prev = gi;
  }
  return sum;
}

void check_T(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("averaging time T must be positive");
}

}  // namespace

// --- Propagator --------------------------------------------------------------------------------

Propagator::Propagator(const Grid& grid, std::vector<double> potential)
    : grid_(grid), potential_(std::move(potential)), fft_(grid.n1, grid.n2) {
  grid_.validate();
  if (!potential_.empty() && potential_.size() != grid_.size()) {
    throw InputError("potential sample count does not match the grid");
  }
  for (double v : potential_) {
    if (!std::isfinite(v)) throw InputError("potential contains non-finite samples");
  }
  k2_.resize(grid_.size());
  for (int i = 0; i < grid_.n1; ++i) {
    for (int j = 0; j < grid_.n2; ++j) k2_[grid_.flat(i, j)] = grid_.k(i, j).norm2();
  }
}

double Propagator::default_dt() const {
  const double kmax2 = grid_.nyquist1() * grid_.nyquist1() + grid_.nyquist2() * grid_.nyquist2();
  return 0.2 / kmax2;
}

std::vector<cplx> Propagator::kinetic_phase(double tau) const {
  // The 1 / (n1 n2) normalization of the inverse transform is folded into the phase table.
  const double inv = 1.0 / static_cast<double>(grid_.size());
  std::vector<cplx> phase(k2_.size());
  for (std::size_t c = 0; c < k2_.size(); ++c) phase[c] = std::polar(inv, -k2_[c] * tau);
  return phase;
}

void Propagator::kinetic(std::vector<cplx>& data, const std::vector<cplx>& phase) const {
  fft_.forward(data);
  for (std::size_t c = 0; c < data.size(); ++c) data[c] *= phase[c];
  fft_.backward(data);
}

void Propagator::run(WaveField& psi, double dt, long steps, long every, const Observer& observer) const {
  if (!same_grid(psi.grid, grid_)) throw BoxError("wave field grid differs from the propagator grid");
  if (!std::isfinite(dt) || dt == 0.0) throw InputError("time step must be finite and nonzero");
  if (steps < 0) throw InputError("step count must be non-negative");
  const double t0 = psi.time;
  if (observer) observer(psi, 0);
  if (steps == 0) return;

  std::vector<cplx> potential_phase;
  if (!potential_.empty()) {
    potential_phase.resize(potential_.size());
    for (std::size_t c = 0; c < potential_.size(); ++c) potential_phase[c] = std::polar(1.0, -potential_[c] * dt);
  }
  auto& data = psi.values;
  const auto check_finite = [&](long step) {
    for (const auto& v : data) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw NumericError("non-finite wave function value at step " + std::to_string(step));
      }
    }
  };

  const auto half = kinetic_phase(0.5 * dt);
  const auto full = kinetic_phase(dt);
  kinetic(data, half);
  for (long s = 1; s <= steps; ++s) {
    if (!potential_phase.empty()) {
      for (std::size_t c = 0; c < data.size(); ++c) data[c] *= potential_phase[c];
    }
    const bool observe = observer && (s == steps || (every > 0 && s % every == 0));
    if (s == steps || observe) {
      kinetic(data, half);
      psi.time = t0 + static_cast<double>(s) * dt;
      check_finite(s);
      if (observe) observer(psi, s);
      if (s < steps) kinetic(data, half);
    } else {
      kinetic(data, full);
    }
  }
}

std::vector<cplx> Propagator::apply_hamiltonian(const WaveField& psi) const {
  if (!same_grid(psi.grid, grid_)) throw BoxError("wave field grid differs from the propagator grid");
  std::vector<cplx> hat = psi.values;
  fft_.forward(hat);
  const double inv = 1.0 / static_cast<double>(grid_.size());
  for (std::size_t c = 0; c < hat.size(); ++c) hat[c] *= k2_[c] * inv;
  fft_.backward(hat);
  if (!potential_.empty()) {
    for (std::size_t c = 0; c < hat.size(); ++c) hat[c] += potential_[c] * psi.values[c];
  }
  return hat;
}

double Propagator::energy(const WaveField& psi) const {
  const auto h = apply_hamiltonian(psi);
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < h.size(); ++c) {
    num += (std::conj(psi.values[c]) * h[c]).real();
    den += std::norm(psi.values[c]);
  }
  if (!(den > 0.0)) throw InputError("energy of a zero field");
  return num / den;
}

// --- Resolution and moments ----------------------------------------------------------------------

double spectral_edge_fraction(const WaveField& psi) {
  const Grid& g = psi.grid;
  std::vector<cplx> hat = psi.values;
  Fft2(g.n1, g.n2).forward(hat);
  const double c1 = kEdgeFraction * g.nyquist1();
  const double c2 = kEdgeFraction * g.nyquist2();
  double edge = 0.0, total = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const Vec2 k = g.k(i, j);
      const double w = std::norm(hat[g.flat(i, j)]);
      total += w;
      if (std::fabs(k.x) >= c1 || std::fabs(k.y) >= c2) edge += w;
    }
  }
  return total > 0.0 ? edge / total : 0.0;
}

void check_resolution(const WaveField& psi) {
  const double f = spectral_edge_fraction(psi);
  if (f >= kEdgeTolerance) {
    throw ResolutionError("grid Nyquist limit does not cover the packet: spectral mass fraction " +
                          format_double(f) + " lies within 5% of the band edge");
  }
}

Vec2 torus_centroid(const WaveField& psi) {
  const auto m = marginals(psi);
  return {circular_mean(m.m1, psi.grid.L1), circular_mean(m.m2, psi.grid.L2)};
}

double second_moment(const WaveField& psi, const Vec2& center, const Vec2& reference) {
  const auto m = marginals(psi);
  return axis_moment(m.m1, psi.grid.L1, center.x, reference.x) +
         axis_moment(m.m2, psi.grid.L2, center.y, reference.y);
}

double outer_mass_fraction(const WaveField& psi, const Vec2& reference) {
  return outer_fraction(psi, marginals(psi), reference);
}

bool MomentSeries::any_wrap() const {
  return std::any_of(wrap_flags.begin(), wrap_flags.end(), [](char f) { return f != 0; });
}

void MomentRecorder::operator()(const WaveField& psi, long /*step*/) {
  const auto m = marginals(psi);
  const Grid& g = psi.grid;
  const Vec2 raw{circular_mean(m.m1, g.L1), circular_mean(m.m2, g.L2)};
  Vec2 centroid = raw;
  if (!started_) {
    series_.center = raw;
    started_ = true;
  } else {
    const Vec2 prev = series_.centroids.back();
    centroid = {prev.x + minimal_image(raw.x - prev.x, g.L1), prev.y + minimal_image(raw.y - prev.y, g.L2)};
  }
  const double value = axis_moment(m.m1, g.L1, series_.center.x, centroid.x) +
                       axis_moment(m.m2, g.L2, series_.center.y, centroid.y);
  series_.times.push_back(psi.time);
  series_.values.push_back(value);
  series_.centroids.push_back(centroid);
  series_.wrap_flags.push_back(outer_fraction(psi, m, centroid) >= kWrapRiskThreshold ? 1 : 0);
}

// --- Averages and fits ---------------------------------------------------------------------------

AveragedValue abel_mean(const std::vector<double>& times, const std::vector<double>& values, double T) {
  check_T(T);
  require_samples(times, values);
  const double required = 5.0 * T;
  if (times.back() < required * (1.0 - 1e-12)) {
    throw RangeError("moment series ends at t = " + format_double(times.back()) +
                     "; the Abel mean at T = " + format_double(T) + " needs t_max >= " +
                     format_double(required) + " (6T = " + format_double(6.0 * T) + " preferred)");
  }
  AveragedValue out;
  out.t_max = std::min(6.0 * T, times.back());
  const double integral = trapezoid(times, values, out.t_max, [T](double t) { return std::exp(-2.0 * t / T); });
  out.value = 2.0 / T * integral;
  const double last = std::fabs(interpolate(times, values, out.t_max));
  // Tail bound assuming at most quadratic growth beyond t_max, f(t) <= f(t_max) (t / t_max)^2.
  const double a = out.t_max;
  out.remainder_bound = std::exp(-2.0 * a / T) * last * (1.0 + T / a + 0.5 * T * T / (a * a));
  return out;
}

AveragedValue cesaro_mean(const std::vector<double>& times, const std::vector<double>& values, double T) {
  check_T(T);
  require_samples(times, values);
  if (times.back() < T * (1.0 - 1e-12)) {
    throw RangeError("moment series ends at t = " + format_double(times.back()) +
                     "; the Cesaro mean needs t_max >= " + format_double(T));
  }
  AveragedValue out;
  out.t_max = T;
  out.value = trapezoid(times, values, T, [](double) { return 1.0; }) / T;
  return out;
}

ExponentFit fit_exponent(const std::vector<double>& Ts, const std::vector<double>& means) {
  if (Ts.size() != means.size()) throw InputError("T grid and means differ in length");
  if (Ts.size() < 5) throw InputError("exponent fit needs at least 5 averaging times");
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    if (!(Ts[i] > 0.0) || !(means[i] > 0.0)) throw InputError("exponent fit needs positive T and means");
  }
  const auto [lo, hi] = std::minmax_element(Ts.begin(), Ts.end());
  const double span = std::log(*hi / *lo);
  if (span < std::log(10.0) * (1.0 - 1e-12)) throw InputError("averaging times must span at least a decade");

  const std::size_t n = Ts.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(Ts[i]);
    y[i] = std::log(means[i]);
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  ExponentFit fit;
  fit.beta = 0.5 * slope;
  fit.intercept = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + slope * x[i]);
    ss += r * r;
    fit.max_residual = std::max(fit.max_residual, std::fabs(r));
  }
  const double se_slope = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
  fit.band = 2.0 * (0.5 * se_slope) + 0.5 * fit.max_residual / span;
  return fit;
}

std::array<double, 3> fit_quadratic(const std::vector<double>& Ts, const std::vector<double>& means) {
  if (Ts.size() != means.size() || Ts.size() < 3) throw InputError("quadratic fit needs at least 3 points");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(Ts.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(Ts.size()));
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    A(r, 0) = 1.0;
    A(r, 1) = Ts[i];
    A(r, 2) = Ts[i] * Ts[i];
    b(r) = means[i];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  return {c(0), c(1), c(2)};
}

// --- Transport check -----------------------------------------------------------------------------

namespace {

// Largest group speed among cells that together hold all but `tail` of the spectral mass.
double bulk_group_speed(const GridBranches& b, const std::vector<cplx>& f, double tail) {
  std::vector<std::pair<double, double>> cells;
  double total = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double w = std::norm(f[c]);
    if (w == 0.0) continue;
    cells.emplace_back(b.grad[c].norm(), w);
    total += w;
  }
  if (cells.empty()) return 0.0;
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& c) { return a.first > c.first; });
  double acc = 0.0;
  for (const auto& [speed, w] : cells) {
    acc += w;
    if (acc > tail * total) return speed;
  }
  return cells.back().first;
}

}  // namespace

TransportReport ballistic_check(const Packet& packet, const MomentumProfile& profile, const GridBranches& branches,
                                const Propagator& propagator, const TransportOptions& options) {
  if (options.Ts.empty()) throw InputError("averaging-time grid is empty");
  if (!same_grid(packet.field.grid, branches.grid) || !same_grid(propagator.grid(), branches.grid)) {
    throw BoxError("packet, branches and propagator must share one grid");
  }
  if (options.sample_every < 1) throw InputError("sample_every must be at least 1");
  if (!(options.abel_horizon >= 5.0)) throw InputError("Abel horizon must be at least 5 T");
  check_resolution(packet.field);

  TransportReport rep;
  rep.Ts = options.Ts;
  std::sort(rep.Ts.begin(), rep.Ts.end());
  const double T_max = rep.Ts.back();
  const double dt = options.dt > 0.0 ? options.dt : propagator.default_dt();
  const double t_max = options.abel_horizon * T_max;
  const long steps = static_cast<long>(std::ceil(t_max / dt - 1e-9));

  const Grid& g = branches.grid;
  rep.max_group_speed = bulk_group_speed(branches, packet.amplitudes, 1e-6);
  rep.box_ok = 2.0 * rep.max_group_speed * T_max < 0.4 * std::min(g.L1, g.L2);
  if (!rep.box_ok) {
    rep.notes.push_back("box is small for the bulk group speed: 2 v T_max = " +
                        format_double(2.0 * rep.max_group_speed * T_max) + " vs 0.4 min(L) = " +
                        format_double(0.4 * std::min(g.L1, g.L2)) +
                        "; moments remain valid while the wrap-risk sentinel stays clear");
  }

  double on_mask = 0.0, all = 0.0;
  for (std::size_t c = 0; c < profile.values.size(); ++c) {
    const double w = std::norm(profile.values[c]);
    all += w;
    if (branches.member[c]) on_mask += w;
  }
  rep.mask_fraction = all > 0.0 ? on_mask / all : 0.0;
  rep.c1 = c1_constant(profile, branches.member, packet.pre_norm);
  rep.c_gv = group_velocity_constant(branches, packet.amplitudes);

  WaveField psi = packet.field;
  psi.time = 0.0;
  const double e0 = propagator.energy(psi);
  const double n0 = psi.norm2();
  MomentRecorder recorder;
  recorder.series().dt = dt;
  recorder.series().steps = steps;
  recorder.series().potential_id = options.potential_id;
  propagator.run(psi, dt, steps, options.sample_every,
                 [&recorder](const WaveField& f, long s) { recorder(f, s); });
  rep.energy_drift = std::fabs(propagator.energy(psi) - e0) / std::max(std::fabs(e0), 1.0);
  rep.norm_drift = std::fabs(psi.norm2() - n0) / n0;
  rep.series = std::move(recorder.series());
  rep.trusted = !rep.series.any_wrap();
  if (!rep.trusted) rep.notes.push_back("wrap risk: packet mass reached the outer 5% of the box");
  rep.initial_moment = rep.series.values.front();

  {
    double w = 0.0;
    Vec2 mean{};
    double m2 = 0.0;
    for (int i = 0; i < g.n1; ++i) {
      for (int j = 0; j < g.n2; ++j) {
        const double a = std::norm(packet.amplitudes[g.flat(i, j)]);
        const Vec2 k = g.k(i, j);
        w += a;
        mean += a * k;
        m2 += a * k.norm2();
      }
    }
    if (w > 0.0) {
      mean *= 1.0 / w;
      rep.momentum_width = std::sqrt(std::max(m2 / w - mean.norm2(), 0.0));
    }
    const double rate = 2.0 * rep.max_group_speed + 3.0 * rep.momentum_width;
    for (std::size_t i = 1; i < rep.series.times.size(); ++i) {
      const double t = rep.series.times[i];
      const double excess = rep.series.values[i] - rep.initial_moment;
      const double allowed = rate * rate * t * t / 4.0;
      rep.upper_bound_ratio = std::max(rep.upper_bound_ratio, excess / allowed);
    }
    rep.upper_bound_holds = rep.upper_bound_ratio <= 1.0;
  }

  for (double T : rep.Ts) {
    const auto a = abel_mean(rep.series.times, rep.series.values, T);
    rep.abel.push_back(a.value);
    rep.abel_remainder.push_back(a.remainder_bound);
    rep.cesaro.push_back(cesaro_mean(rep.series.times, rep.series.values, T).value);
  }
  if (rep.Ts.size() >= 5) {
    rep.fit_abel = fit_exponent(rep.Ts, rep.abel);
    rep.fit_cesaro = fit_exponent(rep.Ts, rep.cesaro);
    rep.exponents_consistent = std::fabs(rep.fit_abel.beta - rep.fit_cesaro.beta) <
                               std::max(rep.fit_abel.band, rep.fit_cesaro.band);
  } else {
    rep.notes.push_back("fewer than 5 averaging times: exponent fit skipped");
  }
  if (rep.Ts.size() >= 3) {
    rep.measured_coefficient = fit_quadratic(rep.Ts, rep.abel)[2];
    rep.coefficient_ratio = rep.c_gv > 0.0 ? rep.measured_coefficient / rep.c_gv : 0.0;
  }
  for (std::size_t i = rep.Ts.size(); i-- > 0;) {
    if (rep.abel[i] < rep.c1 * rep.Ts[i] * rep.Ts[i]) break;
    rep.T0 = rep.Ts[i];
  }
  rep.floor_holds = rep.T0.has_value();
  return rep;
}

// --- Front profile -------------------------------------------------------------------------------

FrontProfile front_profile(const WaveField& snapshot, const Vec2& x0, double initial_width,
                           const GridBranches& branches, const std::vector<cplx>& amplitudes,
                           double bin_width, double tail_sigma) {
  const Grid& g = snapshot.grid;
  if (!same_grid(g, branches.grid)) throw BoxError("snapshot grid differs from the branch grid");
  if (amplitudes.size() != g.size()) throw InputError("amplitude count does not match the grid");
  if (!(bin_width > 0.0)) throw InputError("bin width must be positive");
  const double t = snapshot.time;
  if (!(t > 0.0)) throw InputError("front profile needs a snapshot at positive time");

  // Spectral side: push-forward of |f|^2 by |grad lambda|.
  double total = 0.0, fmax = 0.0, mean_speed = 0.0;
  for (std::size_t c = 0; c < amplitudes.size(); ++c) {
    const double w = std::norm(amplitudes[c]);
    total += w;
    fmax = std::max(fmax, w);
    mean_speed += w * branches.grad[c].norm();
  }
  if (!(total > 0.0)) throw InputError("empty packet");
  mean_speed /= total;
  if (initial_width > t * mean_speed) {
    throw InputError("pre-asymptotic: initial width " + format_double(initial_width) +
                     " exceeds the ballistic displacement " + format_double(t * mean_speed));
  }
  if (outer_mass_fraction(snapshot, x0) >= kWrapRiskThreshold) {
    throw InputError("wrap risk: the snapshot reaches the outer 5% of the box");
  }

  FrontProfile out;
  out.t = t;
  out.bin_width = bin_width;
  out.z_min_support = std::numeric_limits<double>::infinity();
  out.z_max_support = 0.0;
  for (std::size_t c = 0; c < amplitudes.size(); ++c) {
    const double w = std::norm(amplitudes[c]);
    if (w == 0.0) continue;
    const double z = branches.grad[c].norm();
    if (w > 1e-10 * fmax) {
      out.z_min_support = std::min(out.z_min_support, z);
      out.z_max_support = std::max(out.z_max_support, z);
    }
  }
  // Beyond the fastest group speed only the blur of the initial packet remains: width / t in z.
  out.tail_radius = out.z_max_support + tail_sigma * initial_width / t;

  // Position side: radial distances from x0 (minimal image).
  const double dA = g.cell_area();
  const double zmax_pos = std::max(0.5 * std::hypot(g.L1, g.L2) / t, out.z_max_support);
  const auto nbins = static_cast<std::size_t>(std::ceil(zmax_pos / bin_width)) + 1;
  out.rows.resize(nbins);
  std::vector<double> ksum(nbins, 0.0), kw(nbins, 0.0);
  for (std::size_t b = 0; b < nbins; ++b) {
    out.rows[b].z_lo = b * bin_width;
    out.rows[b].z_hi = (b + 1) * bin_width;
  }
  double pos_total = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    const double d1 = minimal_image(axis_coordinate(i, g.n1, g.L1) - x0.x, g.L1);
    for (int j = 0; j < g.n2; ++j) {
      const double d2 = minimal_image(axis_coordinate(j, g.n2, g.L2) - x0.y, g.L2);
      const double w = std::norm(snapshot.values[g.flat(i, j)]) * dA;
      pos_total += w;
      const double z = std::hypot(d1, d2) / t;
      const auto b = std::min(static_cast<std::size_t>(z / bin_width), nbins - 1);
      out.rows[b].measured += w;
      if (z >= out.tail_radius) out.tail_measured += w;
      if (z >= out.z_min_support - bin_width && z <= out.z_max_support + bin_width) out.mass_in_band += w;
    }
  }
  for (std::size_t c = 0; c < amplitudes.size(); ++c) {
    const double w = std::norm(amplitudes[c]);
    if (w == 0.0) continue;
    const double z = branches.grad[c].norm();
    const auto b = std::min(static_cast<std::size_t>(z / bin_width), nbins - 1);
    out.rows[b].predicted += w / total;
    if (z >= out.tail_radius) out.tail_predicted += w / total;
    const int i = static_cast<int>(c / static_cast<std::size_t>(g.n2));
    const int j = static_cast<int>(c % static_cast<std::size_t>(g.n2));
    ksum[b] += w * g.k(i, j).norm();
    kw[b] += w;
  }
  for (std::size_t b = 0; b < nbins; ++b) {
    out.rows[b].measured /= pos_total;
    const double zc = (b + 0.5) * bin_width;
    // Stationary point from the grid branches; free dispersion |grad lambda| = 2|k| elsewhere.
    out.rows[b].k0 = kw[b] > 0.0 ? ksum[b] / kw[b] : 0.5 * zc;
  }
  out.tail_measured /= pos_total;
  out.mass_in_band /= pos_total;
  const auto peak = [&](auto member) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < nbins; ++b) {
      if (out.rows[b].*member > out.rows[best].*member) best = b;
    }
    return static_cast<int>(best);
  };
  out.peak_bin_measured = peak(&FrontRow::measured);
  out.peak_bin_predicted = peak(&FrontRow::predicted);
  return out;
}

double stationary_radius(const BranchSolver& solver, const Vec2& nu_in, double z, double k_guess) {
  if (!(z >= 0.0) || !(k_guess > 0.0)) throw InputError("stationary radius needs z >= 0 and a positive guess");
  const double len = nu_in.norm();
  if (!(len > 0.0)) throw InputError("direction must be nonzero");
  const Vec2 nu = nu_in * (1.0 / len);
  const double K = solver.cutoff_for(nu * (2.0 * k_guess + 1.0));
  const auto speed = [&](double kappa) {
    const auto r = solver.solve(nu * kappa, K);
    const auto* p = std::get_if<DispersionPoint>(&r);
    if (!p) throw RangeError("stationary-point search hit a resonant momentum at |k| = " + format_double(kappa));
    return p->grad.norm();
  };
  double kappa = k_guess;
  const double h = 1e-5;
  for (int it = 0; it < 60; ++it) {
    const double f = speed(kappa) - z;
    const double df = (speed(kappa + h) - speed(kappa - h)) / (2.0 * h);
    if (!(std::fabs(df) > 1e-12)) throw RangeError("group speed is stationary along the direction");
    const double step = f / df;
    kappa -= step;
    if (!(kappa > 0.0)) kappa = 0.5 * (kappa + step);
    if (std::fabs(step) < 1e-12 * std::max(1.0, kappa)) return kappa;
  }
  throw RangeError("stationary-point Newton iteration did not converge");
}

}  // namespace ballistic
