#pragma once

#include <cstdint>

namespace saivla {

// IEEE 754 binary16 <-> binary32 bit conversions. Round-to-nearest-even on
// the way down; NaN payloads keep their top mantissa bits.
std::uint16_t float_to_half_bits(float f);
float half_bits_to_float(std::uint16_t h);

}  // namespace saivla
