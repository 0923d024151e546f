#pragma once

// Shared test fixtures: small potentials with hand-checkable Fourier content.

#include <memory>

#include "ballistic/potentials.hpp"

namespace fixtures {

using namespace ballistic;

inline constexpr const char* kGoldenDigits = "0.6180339887498948482045868343656381177203";

inline std::shared_ptr<const Alpha> golden_alpha() {
  return std::make_shared<const Alpha>(Alpha::parse(kGoldenDigits, QuadraticRelation{1, -1}));
}

// V = g (cos 2 pi x1 + cos 2 pi x2) with unit base period, one layer.
inline LimitPeriodicPotential one_layer(double g, double d = 1.0) {
  LimitPeriodicPotential p;
  p.d1 = p.d2 = d;
  p.eta = 0.5;
  p.coupling = g;
  PeriodicLayer layer;
  layer.index = 1;
  layer.coefficients[{1, 0}] = {0.5, 0.0};
  layer.coefficients[{-1, 0}] = {0.5, 0.0};
  layer.coefficients[{0, 1}] = {0.5, 0.0};
  layer.coefficients[{0, -1}] = {0.5, 0.0};
  p.layers.push_back(layer);
  return p;
}

// Three layers with doubling periods and rapidly shrinking amplitudes.
inline LimitPeriodicPotential three_layers(double g) {
  LimitPeriodicPotential p;
  p.d1 = p.d2 = 1.0;
  p.eta = 0.5;
  p.coupling = g;
  const double amp[3] = {0.5, 0.05, 0.005};
  for (int r = 1; r <= 3; ++r) {
    PeriodicLayer layer;
    layer.index = r;
    layer.coefficients[{1, 0}] = {amp[r - 1], 0.1 * amp[r - 1]};
    layer.coefficients[{-1, 0}] = {amp[r - 1], -0.1 * amp[r - 1]};
    layer.coefficients[{0, 1}] = {0.5 * amp[r - 1], 0.0};
    layer.coefficients[{0, -1}] = {0.5 * amp[r - 1], 0.0};
    layer.coefficients[{1, 1}] = {0.0, 0.25 * amp[r - 1]};
    layer.coefficients[{-1, -1}] = {0.0, -0.25 * amp[r - 1]};
    p.layers.push_back(layer);
  }
  return p;
}

// cos 2 pi x1 + cos 2 pi x2 + cos 2 pi (alpha x1 + x2) + cos 2 pi (x1 + alpha x2)
inline QuasiPeriodicPotential quasi_nonseparable(double g = 1.0) {
  QuasiPeriodicPotential p;
  p.alpha = golden_alpha();
  p.coupling = g;
  const IntPair s1s[4] = {{1, 0}, {0, 1}, {0, 1}, {1, 0}};
  const IntPair s2s[4] = {{0, 0}, {0, 0}, {1, 0}, {0, 1}};
  for (int i = 0; i < 4; ++i) {
    p.terms.push_back({s1s[i], s2s[i], {0.5, 0.0}});
    p.terms.push_back({{-s1s[i][0], -s1s[i][1]}, {-s2s[i][0], -s2s[i][1]}, {0.5, 0.0}});
  }
  return p;
}

// cos 2 pi x1 + cos 2 pi x2 + cos 2 pi alpha x1 + cos 2 pi alpha x2
inline QuasiPeriodicPotential quasi_separable(double g = 1.0) {
  QuasiPeriodicPotential p;
  p.alpha = golden_alpha();
  p.coupling = g;
  const IntPair s1s[4] = {{1, 0}, {0, 1}, {0, 0}, {0, 0}};
  const IntPair s2s[4] = {{0, 0}, {0, 0}, {1, 0}, {0, 1}};
  for (int i = 0; i < 4; ++i) {
    p.terms.push_back({s1s[i], s2s[i], {0.5, 0.0}});
    p.terms.push_back({{-s1s[i][0], -s1s[i][1]}, {-s2s[i][0], -s2s[i][1]}, {0.5, 0.0}});
  }
  return p;
}

}  // namespace fixtures
