#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>

#include "ballistic/alpha.hpp"
#include "ballistic/common.hpp"

namespace ballistic {

// Integer label of a frequency-module point.
//   periodic module:       (m1, m2, 0, 0)        -> 2 pi (m1 / P1, m2 / P2)
//   quasi-periodic module: (s1x, s1y, s2x, s2y)  -> 2 pi (s1 + alpha s2)
using ModeLabel = std::array<std::int64_t, 4>;

ModeLabel operator+(const ModeLabel& a, const ModeLabel& b);
ModeLabel operator-(const ModeLabel& a, const ModeLabel& b);
ModeLabel operator-(const ModeLabel& a);
ModeLabel scaled(const ModeLabel& a, std::int64_t factor);
bool is_zero(const ModeLabel& a);

class FrequencyModule {
 public:
  enum class Kind { Periodic, Quasi };

  static FrequencyModule periodic(double period1, double period2);
  static FrequencyModule quasi(std::shared_ptr<const Alpha> alpha);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] Vec2 wavevector(const ModeLabel& label) const;
  [[nodiscard]] double period1() const { return period1_; }
  [[nodiscard]] double period2() const { return period2_; }
  [[nodiscard]] const std::shared_ptr<const Alpha>& alpha() const { return alpha_; }

 private:
  Kind kind_{Kind::Periodic};
  double period1_{1.0};
  double period2_{1.0};
  std::shared_ptr<const Alpha> alpha_;
  long double alpha_value_{0.0L};
};

// Finite trigonometric sum V(x) = sum_l c_l exp(i <w_l, x>) on a frequency module.
struct FourierSeries {
  FrequencyModule module = FrequencyModule::periodic(1.0, 1.0);
  std::map<ModeLabel, cplx> coefficients;

  [[nodiscard]] cplx at(const ModeLabel& label) const;
  [[nodiscard]] double l1_norm() const;
  [[nodiscard]] double max_frequency() const;
  // Largest |c_{-l} - conj(c_l)| over stored labels (missing partners count as zero).
  [[nodiscard]] double hermiticity_defect() const;
  [[nodiscard]] cplx evaluate(const Vec2& x) const;
};

}  // namespace ballistic
