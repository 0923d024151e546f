#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ballistic/bloch.hpp"
#include "ballistic/common.hpp"

namespace ballistic {

// Rectangle of quasimomenta sampled at nx * ny cell centers.
struct KRect {
  double kx0{0.0}, kx1{1.0}, ky0{0.0}, ky1{1.0};
  int nx{1}, ny{1};

  [[nodiscard]] double dkx() const { return (kx1 - kx0) / nx; }
  [[nodiscard]] double dky() const { return (ky1 - ky0) / ny; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  [[nodiscard]] std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * ny + j; }
  [[nodiscard]] Vec2 center(int i, int j) const {
    return {kx0 + (i + 0.5) * dkx(), ky0 + (j + 0.5) * dky()};
  }
  void validate() const;  // non-empty, finite
};

struct NonResonantMask {
  KRect rect;
  int level{0};
  double theta{0.9};
  double gap_min{0.0};
  std::vector<char> member;
  std::vector<double> weight;
  std::vector<double> gap;
  std::vector<double> lambda;  // branch value (the dominant eigenpair also for resonant cells)
  std::vector<Vec2> grad;      // zero on resonant cells

  [[nodiscard]] double fraction() const;
  // Fraction of member cells among those whose center lies in r0 <= |k| < r1.
  [[nodiscard]] double fraction_in_annulus(double r0, double r1) const;
  // Re-threshold from the stored per-cell data (raising theta or gap_min only removes cells).
  [[nodiscard]] NonResonantMask rethreshold(double theta, double gap_min) const;
};

struct MaskOptions {
  double theta{0.9};
  double gap_min{0.0};  // member requires gap > gap_min
  int level{0};
  int workers{1};
};

NonResonantMask build_mask(const BranchSolver& solver, const KRect& rect, const MaskOptions& options);
// Cellwise intersection (deeper approximant levels remove more cells).
NonResonantMask intersect_masks(const NonResonantMask& a, const NonResonantMask& b);

struct NoRoot {
  std::string reason;
};

struct RadiusOptions {
  double lo{-1.0};  // default bracket [0.5 sqrt(lambda), 1.5 sqrt(lambda)]
  double hi{-1.0};
  double tol{1e-13};  // relative bracket width at termination
};

// Root of lambda_n(kappa nu) = lambda on the ray nu = (cos phi, sin phi) by bisection. The basis
// cutoff is fixed along the ray so the branch is evaluated on one Galerkin space.
std::variant<double, NoRoot> isoenergetic_radius(const BranchSolver& solver, double lambda,
                                                 double phi, const RadiusOptions& options = {});

struct CurveSample {
  double phi{0.0};
  double kappa{0.0};  // NaN for excluded directions
  bool member{false};
};

struct IsoenergeticCurve {
  double lambda{0.0};
  int level{0};
  std::vector<CurveSample> samples;  // uniform in phi over [0, 2 pi)

  [[nodiscard]] double max_deviation() const;  // max over members of |kappa - sqrt(lambda)|
};

IsoenergeticCurve trace_isoenergetic_curve(const BranchSolver& solver, double lambda, int n_phi,
                                           int workers = 1, int level = 0);

// Member fraction of the sampled directions times 2 pi. Requires at least 360 samples.
double direction_set_measure(const IsoenergeticCurve& curve);

struct CurveDerivative {
  std::vector<double> dkappa;  // NaN where a neighbour is missing
  double max_abs{0.0};
  std::size_t evaluated{0};
  std::size_t skipped{0};
  std::string note;
};

// Central differences over consecutive member samples (periodic in phi).
CurveDerivative curve_derivative(const IsoenergeticCurve& curve);

struct ExtendedDispersion {
  KRect rect;
  double blend_width{0.0};
  std::vector<double> chi;         // mollified indicator in [0, 1]
  std::vector<double> correction;  // lambda_ext - |k|^2
  std::vector<double> values;      // lambda_ext at cell centers
  std::array<double, 4> derivative_sup{};   // max |d^m/dk^m correction| along the axes
  std::array<double, 4> derivative_scaled{}; // derivative_sup[m-1] * blend_width^m

  // Bilinear interpolation of the correction plus the exact |k|^2.
  [[nodiscard]] double evaluate(const Vec2& k) const;
};

// Radially symmetric compact bump (1 - |u|^2)^4 on |u| < 1 (unnormalized).
double polynomial_bump(double u2);

// Blends the branch correction lambda_n - |k|^2 into the free dispersion outside the mask:
//   lambda_ext = |k|^2 + chi * cbar,  chi = 1 - (non-member indicator * bump),
// where cbar is the correction on member cells and its bump-weighted member average elsewhere.
// chi is exactly 1 on cells whose whole bump support is inside the mask, so lambda_ext equals the
// computed branch there bit for bit.
ExtendedDispersion extend_dispersion(const NonResonantMask& mask, double blend_width);
// Variant with an explicit correction field (used for synthetic checks).
ExtendedDispersion extend_correction(const KRect& rect, const std::vector<char>& member,
                                     const std::vector<double>& correction, double blend_width);

}  // namespace ballistic
