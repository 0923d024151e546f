#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ballistic/common.hpp"
#include "ballistic/fourier.hpp"
#include "ballistic/potentials.hpp"

namespace ballistic {

// Plane-wave basis {p_r} of a Bloch problem. Index 0 is p = 0; the set is closed under negation.
struct DualLattice {
  FrequencyModule module = FrequencyModule::periodic(1.0, 1.0);
  double cutoff{0.0};
  std::vector<ModeLabel> labels;
  std::vector<Vec2> vectors;
  // Number of potential hops needed to reach p_r from p_0 (-1 when unreachable).
  std::vector<int> hop_distance;
  std::map<ModeLabel, std::size_t> index;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
};

// Periodic module: every lattice point with |p| <= K. Quasi-periodic module: points reachable
// from 0 in at most `max_hops` steps through the potential's frequencies, kept when |p| <= K.
// `max_hops` = 0 means unlimited and is rejected for a quasi-periodic module (the module is dense).
DualLattice build_dual_lattice(const FourierSeries& V, double K, int max_hops = 0);

struct BlochMatrix {
  Vec2 k;
  std::shared_ptr<const DualLattice> lattice;
  Eigen::MatrixXcd H;  // H(r, r') = |k + p_r|^2 delta + W(p_r - p_r')

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(H.rows()); }
  [[nodiscard]] double diagonal(std::size_t r) const { return H(r, r).real(); }
  [[nodiscard]] double hermiticity_residual() const;
  // min over r != 0 of | |k + p_r|^2 - |k|^2 |
  [[nodiscard]] double resonance_gap() const;
};

// Requires K > |k| + max potential frequency.
BlochMatrix assemble_bloch_matrix(const FourierSeries& V, const Vec2& k, double K,
                                  int max_hops = 0);
BlochMatrix assemble_bloch_matrix(const LimitPeriodicPotential& p, int n, const Vec2& k, double K);
BlochMatrix assemble_bloch_matrix(const QuasiPeriodicPotential& p, const Vec2& k, double K,
                                  int max_hops);

struct EigenPairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // columns, unit norm
};

inline constexpr std::size_t kDefaultDenseLimit = 3000;

EigenPairs solve_dense(const BlochMatrix& m, std::size_t dense_limit = kDefaultDenseLimit);

struct DispersionPoint {
  Vec2 k;
  double lambda{0.0};
  // Unit-norm branch eigenvector in lattice order; coefficient 0 is real and positive.
  std::vector<cplx> coefficients;
  Vec2 grad;
  double weight{0.0};  // |c_0|^2
  double gap{0.0};
  std::shared_ptr<const DualLattice> lattice;
  int iterations{0};  // recursive solver only

  // Coefficients rescaled so that C_0 = 1.
  [[nodiscard]] std::vector<cplx> unit_c0() const;
  [[nodiscard]] double l1_unit_c0() const;
};

struct ResonantFlag {
  Vec2 k;
  double weight{0.0};
  double gap{0.0};
  double lambda{0.0};
};

using BranchResult = std::variant<DispersionPoint, ResonantFlag>;

// Picks the eigenpair with the largest |c_0|^2; ties go to the larger weight, then to the smaller
// |lambda - |k|^2|. Below `theta` the point is reported resonant.
BranchResult select_plane_wave_branch(const EigenPairs& pairs, const BlochMatrix& m, double theta);

struct RecursiveOptions {
  int max_iter{20000};
  double tol{1e-13};
  double l1_bound{1e6};
  int depth{0};  // coefficients farther than `depth` hops stay zero; 0 = all reachable
};

// Fixed-point iteration C_r = (lambda - |k+p_r|^2)^{-1} sum_{r'} W_{r-r'} C_{r'} (r != 0, C_0 = 1)
// with a Rayleigh-quotient update of lambda. Throws NonConvergent on divergence.
DispersionPoint solve_recursive(const BlochMatrix& m, const RecursiveOptions& options = {});

// Hellmann-Feynman gradient sum_r 2 (k + p_r) |c_r|^2; requires a unit-norm eigenvector.
Vec2 grad_lambda(const DispersionPoint& point);

struct DecayReport {
  double k_norm{0.0};
  double l1{0.0};          // sum_r |C_r| with C_0 = 1
  double inner_sum{0.0};   // sum over |k + p_r| < |k|/4 within j hops
  std::size_t inner_count{0};
  int j{0};
};

DecayReport coefficient_decay_profile(const DispersionPoint& point, int j);
// Least-squares alpha in S ~ |k|^{-alpha} from (|k|, S) samples with S > 0.
double fit_decay_power(const std::vector<std::pair<double, double>>& samples);

struct BlochOptions {
  double cutoff{-1.0};        // fixed K when positive
  double margin_factor{2.0};  // otherwise K = |k| + margin_factor * max frequency
  int max_hops{0};            // required for quasi-periodic series
  double theta{0.9};
  std::size_t dense_limit{kDefaultDenseLimit};
};

// Dense plane-wave branch solver bound to one potential series.
class BranchSolver {
 public:
  BranchSolver(FourierSeries series, BlochOptions options);

  [[nodiscard]] double cutoff_for(const Vec2& k) const;
  [[nodiscard]] BlochMatrix matrix(const Vec2& k) const;
  [[nodiscard]] BlochMatrix matrix(const Vec2& k, double K) const;
  [[nodiscard]] BranchResult solve(const Vec2& k) const;
  // Fixed basis cutoff: use when comparing nearby k, so the basis does not jump.
  [[nodiscard]] BranchResult solve(const Vec2& k, double K) const;
  [[nodiscard]] std::vector<BranchResult> solve_many(const std::vector<Vec2>& ks, int workers) const;
  [[nodiscard]] const FourierSeries& series() const { return series_; }
  [[nodiscard]] const BlochOptions& options() const { return options_; }
  [[nodiscard]] BranchSolver with_theta(double theta) const;

 private:
  FourierSeries series_;
  BlochOptions options_;
  double max_frequency_{0.0};
};

}  // namespace ballistic
