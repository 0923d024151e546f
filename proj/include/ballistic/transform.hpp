#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ballistic/common.hpp"
#include "ballistic/fourier.hpp"
#include "ballistic/grid.hpp"

namespace ballistic {

// Quasi-plane-wave branches on the dual grid of a simulation box.
//
// For a periodic potential whose period divides the box, the dual grid k_m = 2 pi m / L splits into
// cosets {k + p} (p in the dual lattice of the potential). The discrete Hamiltonian used by the
// propagator (|k|^2 on the FFT grid plus multiplication by the sampled potential, including
// aliasing) is block diagonal over these cosets. Each block is diagonalized exactly; the branch
// attached to a grid point k is the eigenvector whose plane-wave weight at k is largest, with that
// component real positive and unit l2 norm. Distinct members of one block therefore carry
// orthonormal branches, which makes the analysis map a partial isometry.
struct GridBranchOptions {
  double theta{0.9};    // member requires plane-wave weight >= theta
  double gap_min{0.0};  // and resonance gap > gap_min
  int workers{1};
};

struct GridBranches {
  Grid grid;
  int stride1{1}, stride2{1};  // coset stride in index units (L / P per axis)
  int block1{1}, block2{1};    // coset size per axis (N / stride)
  double theta{0.9};
  double gap_min{0.0};
  std::vector<double> lambda;
  std::vector<double> weight;
  std::vector<double> gap;  // min over the other coset members of ||k + p|^2 - |k|^2|
  std::vector<Vec2> grad;   // Hellmann-Feynman gradient of the branch
  std::vector<char> member;
  std::vector<cplx> coefficients;  // block_size() entries per grid point, coset-member order

  [[nodiscard]] std::size_t block_size() const { return static_cast<std::size_t>(block1) * block2; }
  // Grid index of the t-th member of the coset that contains grid index idx.
  [[nodiscard]] std::size_t coset_member(std::size_t idx, std::size_t t) const;
  // Position of grid index idx inside its own coset.
  [[nodiscard]] std::size_t position_in_block(std::size_t idx) const;
  [[nodiscard]] std::span<const cplx> coeffs(std::size_t idx) const {
    return {coefficients.data() + idx * block_size(), block_size()};
  }
  [[nodiscard]] double member_fraction() const;
  // Subset of members whose gap exceeds gap_min (used as a window away from resonances).
  [[nodiscard]] std::vector<char> members_with_gap(double gap_min) const;
};

// Requires a periodic frequency module whose periods divide the box (BoxError otherwise), a power
// of two stride, and all potential frequencies strictly below the grid Nyquist limit.
GridBranches build_grid_branches(const FourierSeries& V, const Grid& grid,
                                 const GridBranchOptions& options = {});
// V = 0: every grid point is its own coset and its branch is the plane wave.
GridBranches free_grid_branches(const Grid& grid);

// Smooth cutoff eta_delta on the dual grid: the mask is eroded by delta/2 and the result is
// convolved with the unit-mass bump (1 - |2 k / delta|^2)^4. Hence eta = 1 on cells whose
// delta-ball lies inside the mask, eta = 0 outside the mask, and |grad eta| = O(1 / delta).
struct CutoffFunction {
  Grid grid;
  double delta{0.0};
  std::vector<double> values;  // FFT order on the dual grid
  std::vector<char> base;      // mask the cutoff was built from
  double grad_sup{0.0};        // max forward-difference |grad eta|
  [[nodiscard]] double grad_sup_times_delta() const { return grad_sup * delta; }
};

// delta must be at least two dual-grid cells.
CutoffFunction build_eta_delta(const Grid& grid, const std::vector<char>& mask, double delta);
// Cells with no non-member within distance `radius` (grid edges count as non-members).
std::vector<char> erode_mask(const Grid& grid, const std::vector<char>& mask, double radius);
// Cells within distance `radius` of a member.
std::vector<char> dilate_mask(const Grid& grid, const std::vector<char>& mask, double radius);

// Complex amplitudes on the dual grid (FFT order) with decay metadata max_k |k|^j |phi(k)|.
struct MomentumProfile {
  Grid grid;
  std::vector<cplx> values;
  std::array<double, 7> decay{};  // j = 0..6

  void refresh_decay();
  void validate() const;  // finite values and finite decay moments up to j = 6
};

// phi(k) = exp(-|k - k0|^2 / (4 sigma^2)): a Gaussian packet whose position variance is
// 1 / (2 sigma^2) and whose momentum density has variance sigma^2 per axis.
MomentumProfile gaussian_profile(const Grid& grid, const Vec2& k0, double sigma);
// phi(k) = (1 - u^2)^4, u = (|k| - (k_min + k_max)/2) / ((k_max - k_min)/2), supported on the ring.
MomentumProfile ring_profile(const Grid& grid, double k_min, double k_max);
// One-cell spike at the dual-grid point nearest k0.
MomentumProfile spike_profile(const Grid& grid, const Vec2& k0);

// Continuum L2 norm on the dual grid: sqrt(sum dk |f|^2).
double k_norm(const Grid& grid, const std::vector<cplx>& f);

// S: f -> sum_k dk / (2 pi) f(k) Psi(k, x). f must vanish off the members.
WaveField synthesize(const GridBranches& branches, const std::vector<cplx>& f);
// T: F -> (1 / 2 pi) (F, Psi(k, .)) on members, zero elsewhere.
std::vector<cplx> analyze(const GridBranches& branches, const WaveField& F);

struct Packet {
  WaveField field;                // unit L2 norm
  std::vector<cplx> amplitudes;   // phi * eta before normalization
  double pre_norm{0.0};           // ||S(phi eta)|| before normalization
  [[nodiscard]] std::vector<cplx> normalized_amplitudes() const;
};

// Psi_0 = S(phi eta) / ||S(phi eta)||. Throws InputError("empty packet") when phi eta vanishes on
// the members, and InputError when phi eta is nonzero on a non-member.
Packet synthesize_packet(const GridBranches& branches, const MomentumProfile& profile,
                         const CutoffFunction& cutoff);

// |‖S 1_W T F‖^2 - sum_W dk |T F|^2| for a window W of members.
double parseval_defect(const GridBranches& branches, const WaveField& F, const std::vector<char>& window);

struct ClosenessReport {
  double estimate{0.0};  // power iteration on (S_n - S_0)^* (S_n - S_0) over the window
  double exact{0.0};     // max over cosets of the block spectral norm
  double bound{0.0};     // sup |1 - c_0| + sum_{r != 0} sup |C_r| over the window
  int iterations{0};
};

ClosenessReport fourier_closeness(const GridBranches& branches, const std::vector<char>& window,
                                  std::uint64_t seed, int iterations = 40);

// (1/160) sum_{mask} dk |k|^2 |phi(k) / scale|^2 (scale = the packet's pre-normalization norm).
double c1_constant(const MomentumProfile& profile, const std::vector<char>& mask, double scale = 1.0);
// Abel T^2 coefficient predicted by the group velocity for a unit-norm packet with amplitudes f:
//   (1/2) sum dk |grad lambda|^2 |f|^2 / sum dk |f|^2.
double group_velocity_constant(const GridBranches& branches, const std::vector<cplx>& f);
// sum dk |k|^2 |f|^2 / sum dk |f|^2.
double mean_k2(const Grid& grid, const std::vector<cplx>& f);

}  // namespace ballistic
