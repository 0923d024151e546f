#include "ballistic/fourier.hpp"

#include <algorithm>
#include <cmath>

namespace ballistic {

ModeLabel operator+(const ModeLabel& a, const ModeLabel& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
ModeLabel operator-(const ModeLabel& a, const ModeLabel& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
ModeLabel operator-(const ModeLabel& a) { return {-a[0], -a[1], -a[2], -a[3]}; }
ModeLabel scaled(const ModeLabel& a, std::int64_t factor) {
  return {a[0] * factor, a[1] * factor, a[2] * factor, a[3] * factor};
}
bool is_zero(const ModeLabel& a) { return a[0] == 0 && a[1] == 0 && a[2] == 0 && a[3] == 0; }

FrequencyModule FrequencyModule::periodic(double period1, double period2) {
  if (!(period1 > 0.0) || !(period2 > 0.0)) throw InputError("periods must be positive");
  FrequencyModule m;
  m.kind_ = Kind::Periodic;
  m.period1_ = period1;
  m.period2_ = period2;
  return m;
}

FrequencyModule FrequencyModule::quasi(std::shared_ptr<const Alpha> alpha) {
  if (!alpha) throw InputError("quasi-periodic module requires alpha");
  FrequencyModule m;
  m.kind_ = Kind::Quasi;
  m.alpha_value_ = alpha->value();
  m.alpha_ = std::move(alpha);
  return m;
}

Vec2 FrequencyModule::wavevector(const ModeLabel& l) const {
  if (kind_ == Kind::Periodic) {
    return {kTwoPi * static_cast<double>(l[0]) / period1_,
            kTwoPi * static_cast<double>(l[1]) / period2_};
  }
  const long double x = static_cast<long double>(l[0]) + alpha_value_ * static_cast<long double>(l[2]);
  const long double y = static_cast<long double>(l[1]) + alpha_value_ * static_cast<long double>(l[3]);
  return {static_cast<double>(2.0L * std::numbers::pi_v<long double> * x),
          static_cast<double>(2.0L * std::numbers::pi_v<long double> * y)};
}

cplx FourierSeries::at(const ModeLabel& label) const {
  const auto it = coefficients.find(label);
  return it == coefficients.end() ? cplx{0.0, 0.0} : it->second;
}

double FourierSeries::l1_norm() const {
  double s = 0.0;
  for (const auto& [label, c] : coefficients) s += std::abs(c);
  return s;
}

double FourierSeries::max_frequency() const {
  double m = 0.0;
  for (const auto& [label, c] : coefficients) m = std::max(m, module.wavevector(label).norm());
  return m;
}

double FourierSeries::hermiticity_defect() const {
  double d = 0.0;
  for (const auto& [label, c] : coefficients) {
    d = std::max(d, std::abs(at(-label) - std::conj(c)));
  }
  return d;
}

cplx FourierSeries::evaluate(const Vec2& x) const {
  cplx s{0.0, 0.0};
  for (const auto& [label, c] : coefficients) {
    s += c * std::polar(1.0, module.wavevector(label).dot(x));
  }
  return s;
}

}  // namespace ballistic
