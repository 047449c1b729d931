#include "saivla/half.hpp"

#include <bit>

namespace saivla {

std::uint16_t float_to_half_bits(float f) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t exp = (x >> 23) & 0xFFu;
    std::uint32_t mant = x & 0x7FFFFFu;

    if (exp == 0xFFu) {  // inf / nan
        if (mant == 0) return sign | 0x7C00u;
        std::uint16_t payload = static_cast<std::uint16_t>(mant >> 13);
        if (payload == 0) payload = 1;  // keep NaN distinct from inf
        return sign | 0x7C00u | payload;
    }

    const int e = static_cast<int>(exp) - 127 + 15;
    if (e >= 31) return sign | 0x7C00u;  // overflow to inf
    if (e <= 0) {
        if (e < -10) return sign;  // underflows to signed zero
        mant |= 0x800000u;
        const std::uint32_t shift = static_cast<std::uint32_t>(14 - e);
        std::uint16_t h = sign | static_cast<std::uint16_t>(mant >> shift);
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
        return h;
    }

    std::uint16_t h = sign | static_cast<std::uint16_t>(e << 10) |
                      static_cast<std::uint16_t>(mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFu;
    // Round to nearest even; a mantissa carry correctly bumps the exponent.
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
    return h;
}

float half_bits_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1Fu;
    const std::uint32_t mant = h & 0x3FFu;
    std::uint32_t f;
    if (exp == 0) {
        if (mant == 0) {
            f = sign;
        } else {
            std::uint32_t m = mant;
            int s = 0;
            while (!(m & 0x400u)) {
                m <<= 1;
                ++s;
            }
            f = sign | (static_cast<std::uint32_t>(113 - s) << 23) | ((m & 0x3FFu) << 13);
        }
    } else if (exp == 31) {
        f = sign | 0x7F800000u | (mant << 13);
    } else {
        f = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(f);
}

}  // namespace saivla
