#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace ballistic {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

// Integer relation alpha^2 = u + v * alpha satisfied by a quadratic irrational.
struct QuadraticRelation {
  std::int64_t u{0};
  std::int64_t v{0};
};

// The irrational frequency of a quasi-periodic potential.
//
// Keeps the exact rational value of its textual input (a terminating decimal or a fraction p/q),
// the continued-fraction expansion of that rational, a long double value for fast screening, and
// optionally an integer quadratic relation. Exact-zero decisions never use floating point: they
// reduce through the quadratic relation when one is declared and otherwise use rational
// arithmetic on the stored value.
class Alpha {
 public:
  // Parses "0.6180339887..." or "p/q". An optional quadratic relation is verified numerically
  // against the decimal digits.
  static Alpha parse(std::string_view text, std::optional<QuadraticRelation> relation = {});
  // Exact binary value of a double; rejects NaN and infinities.
  static Alpha from_double(double value);

  [[nodiscard]] const std::string& text() const { return text_; }
  [[nodiscard]] long double value() const { return value_; }
  [[nodiscard]] const BigRational& exact() const { return exact_; }
  // True when the input was written as a fraction, i.e. the caller declared alpha rational.
  [[nodiscard]] bool declared_rational() const { return declared_rational_; }
  [[nodiscard]] const std::optional<QuadraticRelation>& relation() const { return relation_; }
  [[nodiscard]] const std::vector<BigInt>& continued_fraction() const { return partial_quotients_; }
  // Convergents p_k / q_k of the stored rational, in order.
  [[nodiscard]] std::vector<std::pair<BigInt, BigInt>> convergents() const;

  // Decides a + b*alpha + c*alpha^2 == 0 exactly.
  [[nodiscard]] bool is_zero(std::int64_t a, std::int64_t b, std::int64_t c) const;
  // Value of a + b*alpha + c*alpha^2 (long double).
  [[nodiscard]] long double evaluate(std::int64_t a, std::int64_t b, std::int64_t c) const;

 private:
  std::string text_;
  BigRational exact_;
  long double value_{0.0L};
  bool declared_rational_{false};
  std::optional<QuadraticRelation> relation_;
  std::vector<BigInt> partial_quotients_;

  void expand();
};

}  // namespace ballistic
