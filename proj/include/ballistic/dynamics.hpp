#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ballistic/bloch.hpp"
#include "ballistic/common.hpp"
#include "ballistic/fft.hpp"
#include "ballistic/grid.hpp"
#include "ballistic/transform.hpp"

namespace ballistic {

// Strang split-step propagator for i d/dt Psi = (-Laplacian + V) Psi on the periodic box:
// half kinetic phase exp(-i |k|^2 dt / 2) in frequency space, full potential phase exp(-i V dt) in
// real space, half kinetic phase. Consecutive half kinetic phases are merged unless the field is
// observed in between.
class Propagator {
 public:
  // `potential` is the sampled V on the grid (empty vector for V = 0).
  Propagator(const Grid& grid, std::vector<double> potential = {});

  using Observer = std::function<void(const WaveField&, long step)>;

  // Advances `psi` by `steps` steps of size dt (dt may be negative for time reversal). The observer
  // is called on the initial field and after every `every`-th step (and after the last step).
  // Throws NumericError naming the step index when a value becomes non-finite.
  void run(WaveField& psi, double dt, long steps, long every = 0, const Observer& observer = {}) const;

  // <Psi, H Psi> / <Psi, Psi>.
  [[nodiscard]] double energy(const WaveField& psi) const;
  // H Psi on the grid.
  [[nodiscard]] std::vector<cplx> apply_hamiltonian(const WaveField& psi) const;

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] bool is_free() const { return potential_.empty(); }
  // 0.2 / max |k|^2 on the grid.
  [[nodiscard]] double default_dt() const;

 private:
  [[nodiscard]] std::vector<cplx> kinetic_phase(double tau) const;  // exp(-i |k|^2 tau) / (n1 n2)
  void kinetic(std::vector<cplx>& data, const std::vector<cplx>& phase) const;
  Grid grid_;
  std::vector<double> potential_;
  std::vector<double> k2_;
  Fft2 fft_;
};

// Fraction of |psi_hat|^2 with |k_i| >= 0.95 * Nyquist_i; the propagator requires it below 1e-6.
double spectral_edge_fraction(const WaveField& psi);
// Throws ResolutionError when the spectral edge fraction reaches 1e-6.
void check_resolution(const WaveField& psi);

// Circular-mean centroid per axis, in [-L/2, L/2).
Vec2 torus_centroid(const WaveField& psi);
// sum |x* - center|^2 |psi|^2 dA where x* is the periodic image of x nearest `reference`.
double second_moment(const WaveField& psi, const Vec2& center, const Vec2& reference);
// Fraction of |psi|^2 whose minimal-image offset from `reference` exceeds 0.45 L on some axis.
double outer_mass_fraction(const WaveField& psi, const Vec2& reference);
inline constexpr double kWrapRiskThreshold = 1e-6;

struct MomentSeries {
  std::vector<double> times;
  std::vector<double> values;     // <X^2>(t) about `center`
  std::vector<char> wrap_flags;   // outer-annulus mass >= kWrapRiskThreshold
  std::vector<Vec2> centroids;    // unwrapped packet centroid
  Vec2 center;                    // reference point (initial centroid)
  double dt{0.0};
  long steps{0};
  std::string potential_id;

  [[nodiscard]] bool any_wrap() const;
};

// Observer that records moments about the initial centroid, unwrapping the centroid by continuity
// between observations (the centroid must move less than L/2 between two of them).
class MomentRecorder {
 public:
  void operator()(const WaveField& psi, long step);
  [[nodiscard]] const MomentSeries& series() const { return series_; }
  MomentSeries& series() { return series_; }

 private:
  MomentSeries series_;
  bool started_{false};
};

struct AveragedValue {
  double value{0.0};
  double remainder_bound{0.0};  // truncation error bar (Abel) or 0 (Cesaro)
  double t_max{0.0};
};

// (2/T) int_0^{t_max} exp(-2t/T) f(t) dt by the trapezoid rule over the samples, t_max = min(6T,
// last sample). The reported tail bound exp(-2 t_max / T) f(t_max) (1 + T/t_max + T^2/(2 t_max^2))
// holds whenever f grows at most quadratically beyond t_max. Requires
// samples covering [0, 5T]; throws RangeError naming the required t_max otherwise.
AveragedValue abel_mean(const std::vector<double>& times, const std::vector<double>& values, double T);
// (1/T) int_0^T f(t) dt (trapezoid, linear interpolation at T). Requires samples covering [0, T].
AveragedValue cesaro_mean(const std::vector<double>& times, const std::vector<double>& values, double T);

struct ExponentFit {
  double beta{0.0};
  double band{0.0};       // 2 standard errors plus the largest residual spread over the span
  double intercept{0.0};  // log-log intercept
  double max_residual{0.0};
};

// Least-squares slope of log mean vs log T divided by 2. Requires >= 5 values spanning a decade.
ExponentFit fit_exponent(const std::vector<double>& Ts, const std::vector<double>& means);

// Least-squares fit mean = a + b T + c T^2; returns {a, b, c}.
std::array<double, 3> fit_quadratic(const std::vector<double>& Ts, const std::vector<double>& means);

struct TransportReport {
  std::vector<double> Ts;
  std::vector<double> abel;
  std::vector<double> abel_remainder;
  std::vector<double> cesaro;
  ExponentFit fit_abel;
  ExponentFit fit_cesaro;
  bool exponents_consistent{false};
  double c1{0.0};
  double c_gv{0.0};
  double measured_coefficient{0.0};  // T^2 coefficient of the quadratic fit to the Abel means
  double coefficient_ratio{0.0};     // measured / C_gv
  std::optional<double> T0;          // smallest grid T from which the floor c1 T^2 holds
  bool floor_holds{false};           // floor holds for every T >= T0 (T0 exists)
  bool trusted{true};                // no wrap risk at any observation
  bool box_ok{true};                 // 2 max|grad lambda| T_max < 0.4 min(L)
  double max_group_speed{0.0};
  double momentum_width{0.0};        // sqrt of the |f|^2-variance of k
  // <X^2>(t) <= (2 max|grad lambda| + 3 momentum widths)^2 t^2 / 4 + <X^2>(0) at every sample.
  bool upper_bound_holds{true};
  double upper_bound_ratio{0.0};     // max over samples of (<X^2>(t) - <X^2>(0)) / bound excess
  double mask_fraction{0.0};         // spectral mass of the profile on member cells
  double initial_moment{0.0};
  double energy_drift{0.0};
  double norm_drift{0.0};
  std::vector<std::string> notes;
  MomentSeries series;
};

struct TransportOptions {
  std::vector<double> Ts;
  double dt{0.0};            // 0 selects the propagator default
  long sample_every{1};
  double abel_horizon{6.0};  // t_max = abel_horizon * max(Ts)
  std::string potential_id;
};

// Runs the packet to abel_horizon * max T, forms Abel and Cesaro means at every T, fits the
// exponent, and tests the floor c1 T^2 and the group-velocity coefficient.
TransportReport ballistic_check(const Packet& packet, const MomentumProfile& profile,
                                const GridBranches& branches, const Propagator& propagator,
                                const TransportOptions& options);

struct FrontRow {
  double z_lo{0.0}, z_hi{0.0};
  double measured{0.0};   // fraction of |Psi|^2 with |x - x0| / t in the bin
  double predicted{0.0};  // fraction of |phi eta|^2 with |grad lambda(k)| in the bin
  double k0{0.0};         // stationary-point radius solving z = |grad lambda(k0)| at the bin center
};

struct FrontProfile {
  double t{0.0};
  double bin_width{0.0};
  std::vector<FrontRow> rows;
  double z_min_support{0.0}, z_max_support{0.0};  // range of |grad lambda| over the packet support
  double mass_in_band{0.0};     // measured mass with z in [z_min_support - w, z_max_support + w]
  double tail_radius{0.0};      // z_max_support + tail_sigma * initial_width / t
  double tail_measured{0.0};
  double tail_predicted{0.0};
  int peak_bin_measured{-1};
  int peak_bin_predicted{-1};
};

// Radial density of the late-time field in z = |x - x0| / t compared with the stationary-phase
// prediction (push-forward of the spectral density by |grad lambda|). x0 is the initial centroid.
// Throws InputError("pre-asymptotic") when the initial packet width exceeds the ballistic
// displacement t * <|grad lambda|>, and InputError when the snapshot has wrap risk.
FrontProfile front_profile(const WaveField& snapshot, const Vec2& x0, double initial_width,
                           const GridBranches& branches, const std::vector<cplx>& amplitudes,
                           double bin_width, double tail_sigma = 3.0);

// Radius k solving |grad lambda(k nu)| = z along the direction nu by Newton iteration on the
// plane-wave branch (free case: z / 2).
double stationary_radius(const BranchSolver& solver, const Vec2& nu, double z, double k_guess);

}  // namespace ballistic
