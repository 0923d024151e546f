#include "ballistic/alpha.hpp"

#include <cctype>
#include <cmath>

#include "ballistic/common.hpp"

namespace ballistic {

namespace {

BigInt parse_digits(std::string_view digits, std::string_view whole) {
  if (digits.empty()) throw InputError("alpha: malformed number '" + std::string(whole) + "'");
  for (char ch : digits) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      throw InputError("alpha: malformed number '" + std::string(whole) + "'");
    }
  }
  // cpp_int reads a leading zero as an octal prefix; strip leading zeros first.
  const auto first = digits.find_first_not_of('0');
  if (first == std::string_view::npos) return BigInt(0);
  return BigInt(std::string(digits.substr(first)));
}

BigRational parse_decimal(std::string_view text) {
  std::string_view body = text;
  bool negative = false;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  const auto dot = body.find('.');
  std::string_view int_part = body.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : body.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) {
    throw InputError("alpha: malformed number '" + std::string(text) + "'");
  }
  std::string all(int_part);
  all.append(frac_part);
  BigInt numerator = parse_digits(all, text);
  BigInt denominator = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(frac_part.size()));
  BigRational r(numerator, denominator);
  return negative ? BigRational(-r) : r;
}

}  // namespace

Alpha Alpha::parse(std::string_view text, std::optional<QuadraticRelation> relation) {
  Alpha a;
  a.text_ = std::string(text);
  std::string_view trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.remove_suffix(1);
  if (trimmed.empty()) throw InputError("alpha: empty value");
  const auto slash = trimmed.find('/');
  if (slash != std::string_view::npos) {
    std::string_view num = trimmed.substr(0, slash);
    bool negative = false;
    if (!num.empty() && (num.front() == '-' || num.front() == '+')) {
      negative = num.front() == '-';
      num.remove_prefix(1);
    }
    BigInt p = parse_digits(num, text);
    BigInt q = parse_digits(trimmed.substr(slash + 1), text);
    if (q == 0) throw InputError("alpha: zero denominator in '" + std::string(text) + "'");
    a.exact_ = BigRational(negative ? BigInt(-p) : p, q);
    a.declared_rational_ = true;
  } else {
    a.exact_ = parse_decimal(trimmed);
  }
  a.value_ = a.exact_.convert_to<long double>();
  if (!std::isfinite(a.value_)) throw InputError("alpha: value is not finite");
  if (relation) {
    if (a.declared_rational_) {
      throw InputError("alpha: a quadratic relation cannot accompany a rational value");
    }
    const long double v = a.value_;
    const long double defect = v * v - static_cast<long double>(relation->u) -
                               static_cast<long double>(relation->v) * v;
    const long double scale = 1.0L + std::fabs(static_cast<long double>(relation->u)) +
                              std::fabs(static_cast<long double>(relation->v));
    if (std::fabs(defect) > 1e-12L * scale) {
      throw InputError("alpha: declared relation alpha^2 = " + std::to_string(relation->u) + " + " +
                       std::to_string(relation->v) + " alpha does not hold for " + a.text_);
    }
    a.relation_ = relation;
  }
  a.expand();
  return a;
}

Alpha Alpha::from_double(double value) {
  if (!std::isfinite(value)) throw InputError("alpha must be finite");
  int exponent = 0;
  const double mantissa = std::frexp(value, &exponent);
  // mantissa * 2^53 is an exact integer.
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  exponent -= 53;
  BigRational r(scaled);
  if (exponent >= 0) {
    r *= BigRational(boost::multiprecision::pow(BigInt(2), static_cast<unsigned>(exponent)));
  } else {
    r /= BigRational(boost::multiprecision::pow(BigInt(2), static_cast<unsigned>(-exponent)));
  }
  Alpha a;
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  a.text_ = buffer;
  a.exact_ = r;
  a.value_ = static_cast<long double>(value);
  a.expand();
  return a;
}

void Alpha::expand() {
  partial_quotients_.clear();
  BigInt num = boost::multiprecision::numerator(exact_);
  BigInt den = boost::multiprecision::denominator(exact_);
  for (int i = 0; i < 256 && den != 0; ++i) {
    BigInt q = num / den;
    BigInt r = num % den;
    if (r < 0) {  // floor division for negative values
      q -= 1;
      r += den;
    }
    partial_quotients_.push_back(q);
    num = den;
    den = r;
  }
}

std::vector<std::pair<BigInt, BigInt>> Alpha::convergents() const {
  std::vector<std::pair<BigInt, BigInt>> out;
  BigInt p_prev = 1, q_prev = 0, p = 0, q = 1;
  bool first = true;
  for (const auto& a : partial_quotients_) {
    if (first) {
      p = a;
      q = 1;
      p_prev = 1;
      q_prev = 0;
      first = false;
    } else {
      BigInt pn = a * p + p_prev;
      BigInt qn = a * q + q_prev;
      p_prev = p;
      q_prev = q;
      p = pn;
      q = qn;
    }
    out.emplace_back(p, q);
  }
  return out;
}

bool Alpha::is_zero(std::int64_t a, std::int64_t b, std::int64_t c) const {
  if (relation_) {
    const BigInt rational_part = BigInt(a) + BigInt(c) * relation_->u;
    const BigInt alpha_part = BigInt(b) + BigInt(c) * relation_->v;
    return rational_part == 0 && alpha_part == 0;
  }
  const BigRational value = BigRational(a) + BigRational(b) * exact_ + BigRational(c) * exact_ * exact_;
  return value == 0;
}

long double Alpha::evaluate(std::int64_t a, std::int64_t b, std::int64_t c) const {
  if (relation_) {
    const long double rational_part =
        static_cast<long double>(a) + static_cast<long double>(c) * relation_->u;
    const long double alpha_part =
        static_cast<long double>(b) + static_cast<long double>(c) * relation_->v;
    return rational_part + alpha_part * value_;
  }
  return static_cast<long double>(a) + static_cast<long double>(b) * value_ +
         static_cast<long double>(c) * value_ * value_;
}

}  // namespace ballistic
