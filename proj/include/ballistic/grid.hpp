#pragma once

#include <cstddef>
#include <vector>

#include "ballistic/common.hpp"

namespace ballistic {

// Uniform periodic grid on the torus [0,L1) x [0,L2), stored row-major (axis 1 is the row index).
// Both position and wavenumber axes use FFT ordering: index j < N/2 maps to j, the upper half
// maps to j - N. The origin x = 0 and k = 0 sit at index (0, 0).
struct Grid {
  int n1{0};
  int n2{0};
  double L1{0.0};
  double L2{0.0};

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(n1) * n2; }
  [[nodiscard]] std::size_t flat(int i, int j) const {
    return static_cast<std::size_t>(i) * n2 + j;
  }
  [[nodiscard]] double dx1() const { return L1 / n1; }
  [[nodiscard]] double dx2() const { return L2 / n2; }
  [[nodiscard]] double cell_area() const { return dx1() * dx2(); }
  [[nodiscard]] double dk1() const { return kTwoPi / L1; }
  [[nodiscard]] double dk2() const { return kTwoPi / L2; }
  // Area of one dual-grid cell; equals 4 pi^2 / (L1 L2).
  [[nodiscard]] double dk_area() const { return dk1() * dk2(); }

  [[nodiscard]] static int signed_index(int j, int n) { return j < n / 2 ? j : j - n; }
  [[nodiscard]] static int wrap_index(long m, int n) {
    long r = m % n;
    return static_cast<int>(r < 0 ? r + n : r);
  }

  [[nodiscard]] Vec2 x(int i, int j) const {
    return {signed_index(i, n1) * dx1(), signed_index(j, n2) * dx2()};
  }
  [[nodiscard]] Vec2 k(int i, int j) const {
    return {signed_index(i, n1) * dk1(), signed_index(j, n2) * dk2()};
  }
  // Largest representable wavenumber along each axis.
  [[nodiscard]] double nyquist1() const { return kPi * n1 / L1; }
  [[nodiscard]] double nyquist2() const { return kPi * n2 / L2; }

  // Power-of-two resolutions, positive box.
  void validate() const;
};

struct WaveField {
  Grid grid;
  std::vector<cplx> values;
  double time{0.0};

  WaveField() = default;
  explicit WaveField(const Grid& g) : grid(g), values(g.size(), cplx{0.0, 0.0}) {}

  [[nodiscard]] double norm2() const;  // sum |psi|^2 dx
  [[nodiscard]] double norm() const;
};

// Minimal-image displacement on a periodic axis of length L.
[[nodiscard]] double minimal_image(double d, double L);

}  // namespace ballistic
