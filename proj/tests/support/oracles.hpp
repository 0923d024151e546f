#pragma once

// Independent reference computations used to check the library.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>
#include <variant>

#include "ballistic/bloch.hpp"
#include "ballistic/grid.hpp"

namespace oracles {

using namespace ballistic;

// Rayleigh-Schroedinger second order: |k|^2 + W_0 + sum_{r != 0} |W_{0r}|^2 / (|k|^2 - |k+p_r|^2).
inline double second_order_eigenvalue(const BlochMatrix& m) {
  const double k2 = m.k.norm2();
  double shift = m.H(0, 0).real() - k2;
  for (Eigen::Index r = 1; r < m.H.rows(); ++r) {
    shift += std::norm(m.H(r, 0)) / (k2 - m.H(r, r).real());
  }
  return k2 + shift;
}

// Central differences of the selected branch with a fixed basis. Step h = eps^{1/3} max(1, |k|),
// the usual balance between truncation (h^2) and round-off (eps / h).
inline Vec2 finite_difference_gradient(const BranchSolver& solver, const Vec2& k, double K) {
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, k.norm());
  auto lam = [&](const Vec2& q) {
    const auto r = solver.solve(q, K);
    if (const auto* p = std::get_if<DispersionPoint>(&r)) return p->lambda;
    return std::get<ResonantFlag>(r).lambda;
  };
  return {(lam(k + Vec2{h, 0.0}) - lam(k - Vec2{h, 0.0})) / (2.0 * h),
          (lam(k + Vec2{0.0, h}) - lam(k - Vec2{0.0, h})) / (2.0 * h)};
}

// Reference solution of i dPsi/dt = (-Laplacian + V) Psi: classical RK4 in the interaction picture
// u = exp(i |k|^2 t) Psi_hat, with the discrete Fourier transform done by dense matrix products
// (no FFT library involved). Intended for small grids only.
class IntegratingFactorRk4 {
 public:
  IntegratingFactorRk4(const Grid& grid, const std::vector<double>& potential)
      : grid_(grid), W1_(dft(grid.n1)), W2_(dft(grid.n2)), V_(grid.n1, grid.n2), K2_(grid.n1, grid.n2) {
    for (int i = 0; i < grid.n1; ++i) {
      for (int j = 0; j < grid.n2; ++j) {
        V_(i, j) = potential.empty() ? 0.0 : potential[grid.flat(i, j)];
        K2_(i, j) = grid.k(i, j).norm2();
      }
    }
  }

  WaveField propagate(const WaveField& psi0, double t, int steps) const {
    Eigen::MatrixXcd u = forward(to_matrix(psi0));
    const double h = t / steps;
    double s = 0.0;
    for (int n = 0; n < steps; ++n) {
      const auto k1 = rhs(u, s);
      const auto k2 = rhs(u + 0.5 * h * k1, s + 0.5 * h);
      const auto k3 = rhs(u + 0.5 * h * k2, s + 0.5 * h);
      const auto k4 = rhs(u + h * k3, s + h);
      u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      s += h;
    }
    WaveField out(grid_);
    out.time = psi0.time + t;
    const Eigen::MatrixXcd psi = backward(phase(u, -t));
    for (int i = 0; i < grid_.n1; ++i) {
      for (int j = 0; j < grid_.n2; ++j) out.values[grid_.flat(i, j)] = psi(i, j);
    }
    return out;
  }

 private:
  static Eigen::MatrixXcd dft(int n) {
    Eigen::MatrixXcd W(n, n);
    for (int m = 0; m < n; ++m) {
      for (int j = 0; j < n; ++j) {
        W(m, j) = std::polar(1.0, -2.0 * std::numbers::pi * ((static_cast<long>(m) * j) % n) / n);
      }
    }
    return W;
  }
  Eigen::MatrixXcd to_matrix(const WaveField& f) const {
    Eigen::MatrixXcd M(grid_.n1, grid_.n2);
    for (int i = 0; i < grid_.n1; ++i) {
      for (int j = 0; j < grid_.n2; ++j) M(i, j) = f.values[grid_.flat(i, j)];
    }
    return M;
  }
  Eigen::MatrixXcd forward(const Eigen::MatrixXcd& x) const { return W1_ * x * W2_.transpose(); }
  Eigen::MatrixXcd backward(const Eigen::MatrixXcd& x) const {
    return W1_.adjoint() * x * W2_.conjugate() / static_cast<double>(grid_.size());
  }
  // exp(i |k|^2 t) applied entrywise.
  Eigen::MatrixXcd phase(const Eigen::MatrixXcd& x, double t) const {
    Eigen::MatrixXcd y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) * std::polar(1.0, K2_(i, j) * t);
    }
    return y;
  }
  // du/dt = -i exp(i |k|^2 t) F[V F^{-1}[exp(-i |k|^2 t) u]].
  Eigen::MatrixXcd rhs(const Eigen::MatrixXcd& u, double t) const {
    Eigen::MatrixXcd psi = backward(phase(u, -t));
    psi.array() *= V_.array().cast<std::complex<double>>();
    return std::complex<double>(0.0, -1.0) * phase(forward(psi), t);
  }

  Grid grid_;
  Eigen::MatrixXcd W1_, W2_;
  Eigen::MatrixXd V_, K2_;
};

}  // namespace oracles
