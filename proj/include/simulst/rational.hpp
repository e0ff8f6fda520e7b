#pragma once

// Exact rational time/probability arithmetic. All delays and metric values
// are boost::rational<int64> so tests can assert equality instead of
// tolerances. Times read from files or flags must sit on the microsecond
// grid; probabilities are rounded to the nearest 1e-6.

#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace simulst {

using Rat = boost::rational<std::int64_t>;

inline double to_double(const Rat& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Parses a plain decimal literal ("10", "-3.5", "280.125") exactly.
inline Rat rat_from_decimal(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty decimal literal");
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;
  bool any_digit = false;
  bool seen_dot = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("bad decimal literal: " + std::string(text));
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw std::invalid_argument("bad decimal literal: " + std::string(text));
    if (numerator > (std::numeric_limits<std::int64_t>::max() - 9) / 10)
      throw std::invalid_argument("decimal literal out of range: " + std::string(text));
    numerator = numerator * 10 + (c - '0');
    if (seen_dot) {
      if (denominator > std::numeric_limits<std::int64_t>::max() / 10)
        throw std::invalid_argument("decimal literal out of range: " + std::string(text));
      denominator *= 10;
    }
    any_digit = true;
  }
  if (!any_digit) throw std::invalid_argument("bad decimal literal: " + std::string(text));
  return Rat(negative ? -numerator : numerator, denominator);
}

// Millisecond value from a JSON/CLI double, validated to the microsecond grid.
inline Rat rat_ms_from_double(double ms) {
  if (!std::isfinite(ms)) throw std::invalid_argument("non-finite time value");
  double scaled = ms * 1000.0;
  double rounded = std::nearbyint(scaled);
  if (std::fabs(scaled - rounded) > 1e-6 * std::max(1.0, std::fabs(scaled)))
    throw std::invalid_argument("time value is not on the microsecond grid");
  if (std::fabs(rounded) > 9.0e15) throw std::invalid_argument("time value out of range");
  return Rat(static_cast<std::int64_t>(rounded), 1000);
}

// Probability from a JSON double, rounded to the nearest 1e-6.
inline Rat rat_prob_from_double(double p) {
  if (!std::isfinite(p)) throw std::invalid_argument("non-finite probability");
  double rounded = std::nearbyint(p * 1e6);
  if (rounded < 0.0 || rounded > 1e6) throw std::invalid_argument("probability outside [0,1]");
  return Rat(static_cast<std::int64_t>(rounded), 1000000);
}

// Fixed-point rendering with exact rational rounding (half away from zero).
inline std::string format_fixed(const Rat& r, int decimals = 3) {
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  Rat scaled = r * scale;
  std::int64_t num = scaled.numerator();
  std::int64_t den = scaled.denominator();
  bool negative = num < 0;
  if (negative) num = -num;
  std::int64_t q = num / den;
  std::int64_t rem = num % den;
  if (2 * rem >= den) ++q;
  std::int64_t whole = q / scale;
  std::int64_t frac = q % scale;
  char buf[64];
  if (decimals > 0)
    std::snprintf(buf, sizeof(buf), "%s%lld.%0*lld", negative ? "-" : "",
                  static_cast<long long>(whole), decimals, static_cast<long long>(frac));
  else
    std::snprintf(buf, sizeof(buf), "%s%lld", negative ? "-" : "", static_cast<long long>(whole));
  return buf;
}

}  // namespace simulst
