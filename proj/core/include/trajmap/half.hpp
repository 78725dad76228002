#pragma once

#include <cstdint>

namespace trajmap {

/// Exact decode of an IEEE-754 binary16 bit pattern (every half is representable as a double).
double half_to_double(std::uint16_t bits) noexcept;

/// Round-to-nearest-even encode; overflow saturates to infinity, NaN stays NaN.
std::uint16_t double_to_half(double value) noexcept;

}  // namespace trajmap
