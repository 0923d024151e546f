#include "ballistic/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace ballistic {

namespace {

std::string pair_text(const IntPair& q) {
  return "(" + std::to_string(q[0]) + "," + std::to_string(q[1]) + ")";
}

std::string layer_text(int r) { return "layer " + std::to_string(r); }

std::string number_text(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool finite(const cplx& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

// Conjugate-pair defect tolerance: stored values come from decimal text, so partners are equal
// up to the parsing round-off of each component.
bool conjugate_pair(const cplx& a, const cplx& b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - std::conj(b)) <= 1e-14 * scale;
}

std::int64_t pow2(int e) {
  if (e < 0 || e > 62) throw RangeError("layer offset out of range: 2^" + std::to_string(e));
  return std::int64_t{1} << e;
}

}  // namespace

// --- LimitPeriodicPotential ---------------------------------------------------------------------

int LimitPeriodicPotential::levels() const {
  return schedule.empty() ? static_cast<int>(layers.size()) : static_cast<int>(schedule.size());
}

int LimitPeriodicPotential::layers_at(int n) const {
  if (n == 0) return 0;
  if (n < 0 || n > levels()) {
    throw RangeError("approximant level " + std::to_string(n) + " outside 1.." +
                     std::to_string(levels()));
  }
  return schedule.empty() ? n : schedule[static_cast<std::size_t>(n - 1)];
}

Vec2 LimitPeriodicPotential::period_for_layers(int m) const {
  const double scale = std::ldexp(1.0, std::max(m, 1) - 1);
  return {scale * d1, scale * d2};
}

FourierSeries LimitPeriodicPotential::series_for_layers(int m, int lattice_layers) const {
  if (lattice_layers < m) throw InputError("lattice must be at least as fine as the series");
  const Vec2 P = period_for_layers(lattice_layers);
  FourierSeries s;
  s.module = FrequencyModule::periodic(P.x, P.y);
  const int top = std::max(lattice_layers, 1);
  for (const auto& layer : layers) {
    if (layer.index > m) continue;
    const std::int64_t factor = pow2(top - layer.index);
    for (const auto& [q, v] : layer.coefficients) {
      const ModeLabel label{q[0] * factor, q[1] * factor, 0, 0};
      s.coefficients[label] += coupling * v;
    }
  }
  return s;
}

FourierSeries LimitPeriodicPotential::series(int n) const {
  const int m = layers_at(n);
  return series_for_layers(m, m);
}

FourierSeries LimitPeriodicPotential::increment(int n) const {
  const int hi = layers_at(n);
  const int lo = n >= 1 ? layers_at(n - 1) : 0;
  const Vec2 P = period_for_layers(hi);
  FourierSeries s;
  s.module = FrequencyModule::periodic(P.x, P.y);
  const int top = std::max(hi, 1);
  for (const auto& layer : layers) {
    if (layer.index <= lo || layer.index > hi) continue;
    const std::int64_t factor = pow2(top - layer.index);
    for (const auto& [q, v] : layer.coefficients) {
      s.coefficients[ModeLabel{q[0] * factor, q[1] * factor, 0, 0}] += coupling * v;
    }
  }
  return s;
}

double LimitPeriodicPotential::tail_l1(int m) const {
  double s = 0.0;
  for (const auto& layer : layers) {
    if (layer.index <= m) continue;
    for (const auto& [q, v] : layer.coefficients) s += std::abs(coupling * v);
  }
  return s;
}

LimitPeriodicPotential LimitPeriodicPotential::translated(const Vec2& shift) const {
  LimitPeriodicPotential out = *this;
  for (auto& layer : out.layers) {
    const double scale = std::ldexp(1.0, -(layer.index - 1));
    for (auto& [q, v] : layer.coefficients) {
      const Vec2 w{scale * kTwoPi * q[0] / d1, scale * kTwoPi * q[1] / d2};
      v *= std::polar(1.0, w.dot(shift));
    }
  }
  return out;
}

FourierSeries QuasiPeriodicPotential::series() const {
  FourierSeries s;
  s.module = FrequencyModule::quasi(alpha);
  for (const auto& t : terms) {
    s.coefficients[ModeLabel{t.s1[0], t.s1[1], t.s2[0], t.s2[1]}] += coupling * t.value;
  }
  return s;
}

// --- Validation ----------------------------------------------------------------------------------

bool ValidationReport::has(const std::string& invariant) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.invariant == invariant; });
}

ValidationReport validate_limit_periodic(const LimitPeriodicPotential& p) {
  ValidationReport report;
  auto add = [&](std::string inv, std::string loc, std::string detail) {
    report.violations.push_back({std::move(inv), std::move(loc), std::move(detail)});
  };
  if (!(p.d1 > 0.0) || !(p.d2 > 0.0) || !std::isfinite(p.d1) || !std::isfinite(p.d2)) {
    add("base periods", "potential", "d1, d2 must be positive and finite");
  }
  if (!(p.R0 > 0.0) || !std::isfinite(p.R0)) add("bandwidth", "potential", "R0 must be positive");
  if (!(p.eta > 0.0) || !std::isfinite(p.eta)) add("decay budget", "potential", "eta must be positive");
  if (!std::isfinite(p.coupling)) add("coupling", "potential", "coupling must be finite");

  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (p.layers[i].index != static_cast<int>(i) + 1) {
      add("layer indices", layer_text(p.layers[i].index),
          "expected index " + std::to_string(i + 1) + " (indices must be 1..len without gaps)");
    }
  }
  int previous = 0;
  for (std::size_t i = 0; i < p.schedule.size(); ++i) {
    const int m = p.schedule[i];
    if (m <= previous) {
      add("schedule", "M_" + std::to_string(i + 1), "schedule must be strictly increasing and positive");
    }
    if (m > static_cast<int>(p.layers.size())) {
      add("schedule", "M_" + std::to_string(i + 1), "exceeds the number of layers");
    }
    previous = m;
  }

  for (const auto& layer : p.layers) {
    const std::string where = layer_text(layer.index);
    double l1 = 0.0;
    bool all_finite = true;
    for (const auto& [q, v] : layer.coefficients) {
      const std::string loc = where + " q=" + pair_text(q);
      if (!finite(v)) {
        add("finite", loc, "coefficient is not finite");
        all_finite = false;
        continue;
      }
      const cplx scaled = p.coupling * v;
      l1 += std::abs(scaled);
      if (q[0] == 0 && q[1] == 0) add("zero mean", loc, "coefficient at q=(0,0)");
      const auto partner = layer.coefficients.find(IntPair{-q[0], -q[1]});
      if (partner == layer.coefficients.end()) {
        add("realness", loc, "missing conjugate partner at " + pair_text({-q[0], -q[1]}));
      } else if (!conjugate_pair(partner->second, v)) {
        add("realness", loc, "v(-q) differs from conj(v(q))");
      }
      const double reach = std::ldexp(std::hypot(q[0], q[1]), -(layer.index - 1));
      if (!(reach < p.R0)) {
        add("bandwidth", loc, "2^{-r+1}|q| = " + number_text(reach) + " >= R0 = " + number_text(p.R0));
      }
    }
    if (all_finite && p.eta > 0.0) {
      const double budget = std::exp(-std::pow(2.0, p.eta * layer.index));
      if (!(l1 < budget)) {
        add("decay budget", where,
            "sum |g v| = " + number_text(l1) + " >= exp(-2^{eta r}) = " + number_text(budget));
      }
    }
  }
  return report;
}

ValidationReport validate_quasi_periodic(const QuasiPeriodicPotential& p) {
  ValidationReport report;
  auto add = [&](std::string inv, std::string loc, std::string detail) {
    report.violations.push_back({std::move(inv), std::move(loc), std::move(detail)});
  };
  if (!p.alpha) {
    add("alpha", "potential", "alpha missing");
    return report;
  }
  const long double a = p.alpha->value();
  if (!(a > 0.0L && a < 1.0L)) add("alpha", "potential", "alpha must lie in (0,1)");
  if (p.alpha->declared_rational()) add("alpha", "potential", "alpha is rational");
  if (!std::isfinite(p.coupling)) add("coupling", "potential", "coupling must be finite");
  if (p.terms.empty()) add("frequency set", "potential", "frequency set is empty");

  std::map<ModeLabel, std::size_t> seen;
  for (std::size_t i = 0; i < p.terms.size(); ++i) {
    const auto& t = p.terms[i];
    const ModeLabel label{t.s1[0], t.s1[1], t.s2[0], t.s2[1]};
    const std::string loc = "s1=" + pair_text(t.s1) + " s2=" + pair_text(t.s2);
    if (!finite(t.value)) add("finite", loc, "coefficient is not finite");
    if (is_zero(label)) add("zero mean", loc, "zero frequency");
    if (!seen.emplace(label, i).second) add("distinct frequencies", loc, "listed twice");
  }
  for (const auto& [label, i] : seen) {
    const auto partner = seen.find(-label);
    const auto& t = p.terms[i];
    const std::string loc = "s1=" + pair_text(t.s1) + " s2=" + pair_text(t.s2);
    if (partner == seen.end()) {
      add("symmetry", loc, "(-s1,-s2) missing from the frequency set");
    } else if (!conjugate_pair(p.terms[partner->second].value, t.value)) {
      add("symmetry", loc, "coefficient of (-s1,-s2) is not the conjugate");
    }
  }
  // Distinct labels are distinct physical frequencies because 1 and an irrational alpha are
  // linearly independent over the rationals; only a rational alpha can merge them.
  if (p.alpha->declared_rational()) {
    const BigRational& r = p.alpha->exact();
    std::set<std::pair<BigRational, BigRational>> physical;
    for (const auto& [label, i] : seen) {
      auto key = std::make_pair(BigRational(label[0]) + r * label[2], BigRational(label[1]) + r * label[3]);
      if (!physical.insert(key).second) {
        const auto& t = p.terms[i];
        add("distinct frequencies", "s1=" + pair_text(t.s1) + " s2=" + pair_text(t.s2),
            "coincides with another physical frequency");
      }
    }
  }
  return report;
}

LimitPeriodicPotential truncate(const LimitPeriodicPotential& p, int n) {
  if (n < 1 || n > p.levels()) {
    throw RangeError("truncation level " + std::to_string(n) + " outside 1.." +
                     std::to_string(p.levels()));
  }
  const int m = p.layers_at(n);
  LimitPeriodicPotential out = p;
  out.layers.clear();
  for (const auto& layer : p.layers) {
    if (layer.index <= m) out.layers.push_back(layer);
  }
  if (!p.schedule.empty()) out.schedule.assign(p.schedule.begin(), p.schedule.begin() + n);
  return out;
}

// --- A1 -----------------------------------------------------------------------------------------

A1Report check_A1(const Alpha& alpha, const A1Options& o) {
  if (!(o.N0 > 0.0) || !std::isfinite(o.N0)) throw InputError("A1: N0 must be positive");
  if (o.N1 < 1) throw InputError("A1: N1 must be positive");
  if (o.search_bound < o.N1) throw InputError("A1: search bound must be at least N1");
  if (o.search_bound > 100000) throw InputError("A1: search bound above 1e5 is not supported");

  A1Report report;
  report.degenerate_input = alpha.declared_rational();
  const std::int64_t B = o.search_bound;
  // Thresholds shrink with |n|; anything above the largest one cannot be a violation.
  const long double max_threshold = std::pow(static_cast<long double>(o.N1 + 1), -static_cast<long double>(o.N0));
  const long double screen = max_threshold + 1e-12L;

  for (std::int64_t n3 = -B; n3 <= B; ++n3) {
    const std::int64_t rest = B - std::llabs(n3);
    for (std::int64_t n2 = -rest; n2 <= rest; ++n2) {
      const long double x = alpha.evaluate(0, n2, n3);
      const long double f = std::floor(-x);
      for (int step = 0; step < 2; ++step) {
        const long double cand = f + step;
        if (std::fabs(cand) > static_cast<long double>(B)) continue;
        const auto n1 = static_cast<std::int64_t>(cand);
        const std::int64_t s = std::llabs(n1) + std::llabs(n2) + std::llabs(n3);
        if (s <= o.N1 || s > B) continue;
        ++report.candidates_tested;
        const long double approx = std::fabs(cand + x);
        if (approx > screen) continue;
        const long double threshold =
            std::pow(static_cast<long double>(s), -static_cast<long double>(o.N0));
        if (alpha.is_zero(n1, n2, n3)) {
          if (alpha.relation()) {
            report.algebraic_zeros.push_back({n1, n2, n3});
          } else {
            report.rational_zeros.push_back({n1, n2, n3});
            report.degenerate_input = true;
          }
          if (!o.zero_branch) report.violations.push_back({{n1, n2, n3}, 0.0L, threshold});
          continue;
        }
        const long double value = std::fabs(alpha.evaluate(n1, n2, n3));
        if (value <= threshold) report.violations.push_back({{n1, n2, n3}, value, threshold});
      }
    }
  }
  return report;
}

A1Report check_A1(double alpha, const A1Options& options) {
  return check_A1(Alpha::from_double(alpha), options);
}

// --- A2 -----------------------------------------------------------------------------------------

A2Report check_A2(const Alpha& alpha, const std::vector<FrequencyPair>& S) {
  if (S.empty()) throw InputError("A2: frequency set is empty");
  std::set<std::array<std::int64_t, 4>> members;
  for (const auto& s : S) {
    const std::array<std::int64_t, 4> v{s.s1[0], s.s2[0], s.s1[1], s.s2[1]};
    if (v == std::array<std::int64_t, 4>{0, 0, 0, 0}) throw InputError("A2: zero vector in frequency set");
    members.insert(v);
  }
  for (const auto& v : members) {
    if (!members.count({-v[0], -v[1], -v[2], -v[3]})) {
      throw InputError("A2: frequency set is not symmetric");
    }
  }
  A2Report report;
  for (std::size_t i = 0; i < S.size(); ++i) {
    // x = a + b alpha, y = c + d alpha
    const std::int64_t a = S[i].s1[0], b = S[i].s2[0], c = S[i].s1[1], d = S[i].s2[1];
    for (std::size_t j = i + 1; j < S.size(); ++j) {
      const std::int64_t a2 = S[j].s1[0], b2 = S[j].s2[0], c2 = S[j].s1[1], d2 = S[j].s2[1];
      // cross product x_i y_j - y_i x_j = A + B alpha + C alpha^2
      const std::int64_t A = a * c2 - c * a2;
      const std::int64_t Bc = a * d2 + b * c2 - c * b2 - d * a2;
      const std::int64_t C = b * d2 - d * b2;
      if (!alpha.is_zero(A, Bc, C)) continue;
      bool rational = true;
      if (!alpha.declared_rational()) {
        // s_i = c s_j with c rational iff the integer 4-vectors are proportional.
        const std::array<std::int64_t, 4> u{a, b, c, d}, w{a2, b2, c2, d2};
        for (int p = 0; p < 4 && rational; ++p) {
          for (int q = p + 1; q < 4; ++q) {
            if (u[p] * w[q] != u[q] * w[p]) {
              rational = false;
              break;
            }
          }
        }
      }
      const A2Pair pair{i, j, rational};
      report.colinear_pairs.push_back(pair);
      if (!rational) report.violations.push_back(pair);
    }
  }
  return report;
}

A2Report check_A2(const QuasiPeriodicPotential& p) {
  if (!p.alpha) throw InputError("A2: alpha missing");
  std::vector<FrequencyPair> S;
  S.reserve(p.terms.size());
  for (const auto& t : p.terms) S.push_back({t.s1, t.s2});
  return check_A2(*p.alpha, S);
}

// --- Sampling ------------------------------------------------------------------------------------

double PotentialField::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

double PotentialField::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

double PotentialField::min() const {
  return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

PotentialField sample_series(const FourierSeries& series, const Grid& grid, bool periodic_box,
                             int workers) {
  grid.validate();
  struct Term {
    cplx c;
    std::vector<cplx> row;  // exp(i w1 x1(i))
    std::vector<cplx> col;  // exp(i w2 x2(j))
  };
  std::vector<Term> terms;
  terms.reserve(series.coefficients.size());
  PotentialField field;
  field.grid = grid;
  for (const auto& [label, c] : series.coefficients) {
    if (!finite(c)) throw NumericError("potential coefficient is not finite");
    field.l1 += std::abs(c);
    if (c == cplx{0.0, 0.0}) continue;
    const Vec2 w = series.module.wavevector(label);
    if (!(std::fabs(w.x) < grid.nyquist1()) || !(std::fabs(w.y) < grid.nyquist2())) {
      throw ResolutionError("frequency (" + number_text(w.x) + ", " + number_text(w.y) +
                            ") is not below the grid Nyquist limit (" +
                            number_text(grid.nyquist1()) + ", " + number_text(grid.nyquist2()) + ")");
    }
    if (periodic_box) {
      const double m1 = w.x * grid.L1 / kTwoPi;
      const double m2 = w.y * grid.L2 / kTwoPi;
      if (std::fabs(m1 - std::round(m1)) > 1e-9 * std::max(1.0, std::fabs(m1)) ||
          std::fabs(m2 - std::round(m2)) > 1e-9 * std::max(1.0, std::fabs(m2))) {
        throw BoxError("box " + number_text(grid.L1) + "x" + number_text(grid.L2) +
                       " is not commensurate with the potential periods");
      }
    }
    Term t{c, std::vector<cplx>(grid.n1), std::vector<cplx>(grid.n2)};
    for (int i = 0; i < grid.n1; ++i) t.row[i] = std::polar(1.0, w.x * grid.x(i, 0).x);
    for (int j = 0; j < grid.n2; ++j) t.col[j] = std::polar(1.0, w.y * grid.x(0, j).y);
    terms.push_back(std::move(t));
  }
  field.values.assign(grid.size(), 0.0);
  std::vector<double> row_residue(grid.n1, 0.0);
  parallel_for(static_cast<std::size_t>(grid.n1), workers, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    double residue = 0.0;
    for (int j = 0; j < grid.n2; ++j) {
      cplx s{0.0, 0.0};
      for (const auto& t : terms) s += t.c * t.row[i] * t.col[j];
      field.values[grid.flat(i, j)] = s.real();
      residue = std::max(residue, std::fabs(s.imag()));
    }
    row_residue[ii] = residue;
  });
  for (double r : row_residue) field.imag_residue = std::max(field.imag_residue, r);
  for (double v : field.values) {
    if (!std::isfinite(v)) throw NumericError("sampled potential is not finite");
  }
  return field;
}

PotentialField sample_potential(const LimitPeriodicPotential& p, const Grid& grid, int workers) {
  int top = 0;
  for (const auto& layer : p.layers) top = std::max(top, layer.index);
  return sample_series(p.series_for_layers(top, top), grid, true, workers);
}

PotentialField sample_potential(const QuasiPeriodicPotential& p, const Grid& grid, int workers) {
  return sample_series(p.series(), grid, false, workers);
}

}  // namespace ballistic
