#include "timecheck/rational.hpp"

#include <cctype>
#include <stdexcept>

namespace timecheck {

namespace {

using boost::multiprecision::cpp_int;

cpp_int parse_digits(std::string_view digits, std::string_view whole) {
  if (digits.empty()) throw std::invalid_argument("invalid rational: '" + std::string(whole) + "'");
  cpp_int v = 0;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw std::invalid_argument("invalid rational: '" + std::string(whole) + "'");
    }
    v = v * 10 + (c - '0');
  }
  return v;
}

cpp_int parse_signed_int(std::string_view s, std::string_view whole) {
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  cpp_int v = parse_digits(s, whole);
  return neg ? cpp_int(-v) : v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view whole = text;
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    cpp_int num = parse_signed_int(text.substr(0, slash), whole);
    cpp_int den = parse_digits(text.substr(slash + 1), whole);
    if (den == 0) throw std::invalid_argument("invalid rational (zero denominator): '" + std::string(whole) + "'");
    return Rational(num, den);
  }

  bool neg = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    neg = text.front() == '-';
    text.remove_prefix(1);
  }
  std::string_view int_part = text;
  std::string_view frac_part;
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    int_part = text.substr(0, dot);
    frac_part = text.substr(dot + 1);
    if (int_part.empty() && frac_part.empty()) {
      throw std::invalid_argument("invalid rational: '" + std::string(whole) + "'");
    }
  }
  cpp_int num = int_part.empty() ? cpp_int(0) : parse_digits(int_part, whole);
  cpp_int den = 1;
  for (char c : frac_part) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw std::invalid_argument("invalid rational: '" + std::string(whole) + "'");
    }
    num = num * 10 + (c - '0');
    den *= 10;
  }
  if (neg) num = -num;
  return Rational(num, den);
}

std::string numerator_string(const Rational& r) {
  return boost::multiprecision::numerator(r).str();
}

std::string denominator_string(const Rational& r) {
  return boost::multiprecision::denominator(r).str();
}

std::string to_string(const Rational& r) {
  auto den = boost::multiprecision::denominator(r);
  if (den == 1) return numerator_string(r);
  return numerator_string(r) + "/" + den.str();
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace timecheck
