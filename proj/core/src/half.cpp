#include "trajmap/half.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace trajmap {

double half_to_double(std::uint16_t bits) noexcept {
  const bool negative = (bits & 0x8000u) != 0;
  const unsigned exponent = (bits >> 10) & 0x1fu;
  const unsigned mantissa = bits & 0x3ffu;
  double magnitude;
  if (exponent == 0) {
    magnitude = std::ldexp(static_cast<double>(mantissa), -24);
  } else if (exponent == 0x1f) {
    magnitude = mantissa == 0 ? std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::quiet_NaN();
  } else {
    magnitude = std::ldexp(static_cast<double>(mantissa | 0x400u), static_cast<int>(exponent) - 25);
  }
  return negative ? -magnitude : magnitude;
}

std::uint16_t double_to_half(double value) noexcept {
  const std::uint64_t raw = std::bit_cast<std::uint64_t>(value);
  const auto sign = static_cast<std::uint16_t>((raw >> 48) & 0x8000u);
  if (std::isnan(value)) return static_cast<std::uint16_t>(sign | 0x7e00u);
  const double magnitude = std::fabs(value);
  if (magnitude >= 65520.0) return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (magnitude < std::ldexp(1.0, -14)) {
    // Subnormal range: quantum is 2^-24; nearbyint rounds half to even.
    const double units = std::nearbyint(std::ldexp(magnitude, 24));
    return static_cast<std::uint16_t>(sign | static_cast<std::uint16_t>(units));
  }
  int exp2 = 0;
  const double frac = std::frexp(magnitude, &exp2);  // magnitude = frac * 2^exp2, frac in [0.5, 1)
  double units = std::nearbyint(std::ldexp(frac, 11));  // 11 significant bits
  if (units >= 2048.0) {
    units /= 2.0;
    ++exp2;
  }
  const int biased = exp2 - 1 + 15;
  if (biased >= 0x1f) return static_cast<std::uint16_t>(sign | 0x7c00u);
  const auto mantissa = static_cast<std::uint16_t>(static_cast<unsigned>(units) & 0x3ffu);
  return static_cast<std::uint16_t>(sign | (biased << 10) | mantissa);
}

}  // namespace trajmap
