#include "saivla/crc32.hpp"

#include <array>
#include <cstdio>

namespace saivla {

namespace {

std::array<std::uint32_t, 256> make_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) {
            c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
        }
        t[i] = c;
    }
    return t;
}

const std::array<std::uint32_t, 256>& table() {
    static const std::array<std::uint32_t, 256> t = make_table();
    return t;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto& t = table();
    for (std::size_t i = 0; i < len; ++i) {
        c = t[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32(std::string_view s) { return crc32(s.data(), s.size()); }

std::string crc32_hex(std::string_view s) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", crc32(s));
    return std::string(buf);
}

}  // namespace saivla
