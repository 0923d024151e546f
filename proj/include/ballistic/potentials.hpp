#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ballistic/alpha.hpp"
#include "ballistic/common.hpp"
#include "ballistic/fourier.hpp"
#include "ballistic/grid.hpp"

namespace ballistic {

using IntPair = std::array<int, 2>;

// One periodic layer V_r with periods 2^{r-1} (d1, d2). Coefficient q multiplies
// exp(i 2^{-r+1} 2 pi (q1 x1 / d1 + q2 x2 / d2)).
struct PeriodicLayer {
  int index{1};
  std::map<IntPair, cplx> coefficients;
};

// V = g * sum_r V_r with doubling periods; approximant n keeps layers 1..M_n.
struct LimitPeriodicPotential {
  double d1{1.0};
  double d2{1.0};
  double R0{10.0};
  double eta{0.5};
  double coupling{1.0};
  std::vector<PeriodicLayer> layers;
  std::vector<int> schedule;  // M_n for n = 1..; empty means M_n = n

  [[nodiscard]] int levels() const;
  [[nodiscard]] int layers_at(int n) const;  // M_n
  // Periods of the approximant with the given number of layers.
  [[nodiscard]] Vec2 period_for_layers(int m) const;
  [[nodiscard]] Vec2 period_of_level(int n) const { return period_for_layers(layers_at(n)); }
  // Fourier series of g * sum_{r <= m} V_r labelled on the lattice of the approximant with
  // `lattice_layers` layers (lattice_layers >= m).
  [[nodiscard]] FourierSeries series_for_layers(int m, int lattice_layers) const;
  // Series of the potential of H_n on its own lattice.
  [[nodiscard]] FourierSeries series(int n) const;
  // W_n = V(H_n) - V(H_{n-1}) on the lattice of H_n.
  [[nodiscard]] FourierSeries increment(int n) const;
  // Sum over all stored coefficients of g |v| for layers above m.
  [[nodiscard]] double tail_l1(int m) const;
  // Returns a copy whose coefficients are multiplied by exp(i <w, shift>): the potential
  // translated by -shift.
  [[nodiscard]] LimitPeriodicPotential translated(const Vec2& shift) const;
};

struct QuasiFrequency {
  IntPair s1{0, 0};
  IntPair s2{0, 0};
  cplx value{0.0, 0.0};
};

// V(x) = g * sum_{(s1,s2) in S} V_{s1,s2} exp(2 pi i <s1 + alpha s2, x>).
struct QuasiPeriodicPotential {
  std::shared_ptr<const Alpha> alpha;
  std::vector<QuasiFrequency> terms;
  double coupling{1.0};

  [[nodiscard]] FourierSeries series() const;
};

struct Violation {
  std::string invariant;  // "zero mean", "realness", "bandwidth", "decay budget", ...
  std::string location;   // layer / coefficient identification
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  [[nodiscard]] bool ok() const { return violations.empty(); }
  [[nodiscard]] bool has(const std::string& invariant) const;
};

ValidationReport validate_limit_periodic(const LimitPeriodicPotential& p);
ValidationReport validate_quasi_periodic(const QuasiPeriodicPotential& p);

// Potential of H_n: layers 1..M_n. The returned schedule is the prefix of the original one.
LimitPeriodicPotential truncate(const LimitPeriodicPotential& p, int n);

// --- Diophantine conditions -------------------------------------------------------------------

struct A1Options {
  double N0{3.0};
  std::int64_t N1{5};
  std::int64_t search_bound{60};
  // When true (default) exact zeros of n1 + alpha n2 + alpha^2 n3 satisfy the condition.
  bool zero_branch{true};
};

struct A1Entry {
  std::array<std::int64_t, 3> n{0, 0, 0};
  long double value{0.0L};      // |n1 + alpha n2 + alpha^2 n3|
  long double threshold{0.0L};  // (|n1| + |n2| + |n3|)^{-N0}
};

struct A1Report {
  std::vector<A1Entry> violations;
  // Exact zeros certified through the quadratic relation.
  std::vector<std::array<std::int64_t, 3>> algebraic_zeros;
  // Exact zeros certified by rational arithmetic on a rational alpha.
  std::vector<std::array<std::int64_t, 3>> rational_zeros;
  bool degenerate_input{false};  // alpha is rational
  // Triples whose value was tested. For fixed (n2, n3) only the two integers n1 nearest to
  // -(alpha n2 + alpha^2 n3) can fall below a threshold smaller than one; the rest are skipped.
  std::uint64_t candidates_tested{0};
  [[nodiscard]] bool holds() const { return violations.empty() && !degenerate_input; }
};

A1Report check_A1(const Alpha& alpha, const A1Options& options);
A1Report check_A1(double alpha, const A1Options& options);

struct FrequencyPair {
  IntPair s1{0, 0};
  IntPair s2{0, 0};
};

struct A2Pair {
  std::size_t first{0};
  std::size_t second{0};
  bool rational_ratio{true};
};

struct A2Report {
  std::vector<A2Pair> colinear_pairs;
  std::vector<A2Pair> violations;
  [[nodiscard]] bool holds() const { return violations.empty(); }
};

A2Report check_A2(const Alpha& alpha, const std::vector<FrequencyPair>& S);
A2Report check_A2(const QuasiPeriodicPotential& p);

// --- Sampling ---------------------------------------------------------------------------------

struct PotentialField {
  Grid grid;
  std::vector<double> values;
  double imag_residue{0.0};  // max |Im| of the synthesized sum
  double l1{0.0};            // sum |coefficient|

  [[nodiscard]] double mean() const;
  [[nodiscard]] double max() const;
  [[nodiscard]] double min() const;
};

// Literal trigonometric sum at the grid points. Throws ResolutionError when a frequency reaches
// the grid Nyquist limit and, if `periodic_box` is set, BoxError when a frequency does not fit an
// integer number of times into the box.
PotentialField sample_series(const FourierSeries& series, const Grid& grid, bool periodic_box,
                             int workers = 1);
PotentialField sample_potential(const LimitPeriodicPotential& p, const Grid& grid,
                                int workers = 1);
PotentialField sample_potential(const QuasiPeriodicPotential& p, const Grid& grid,
                                int workers = 1);

}  // namespace ballistic
