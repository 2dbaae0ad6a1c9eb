#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace timecheck {

/// Exact arbitrary-precision rational. Used wherever a threshold boundary
/// must compare bit-reproducibly (vote ratios, fused g values, weights).
using Rational = boost::multiprecision::cpp_rational;

/// Parses "3/5", "0.6", "1" or "-2.25" into an exact rational.
/// Throws std::invalid_argument on anything else.
Rational parse_rational(std::string_view text);

/// "num/den" in lowest terms, or "num" when den == 1.
std::string to_string(const Rational& r);

std::string numerator_string(const Rational& r);
std::string denominator_string(const Rational& r);

double to_double(const Rational& r);

}  // namespace timecheck
