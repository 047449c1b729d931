#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace saivla {

// Reflected CRC-32, polynomial 0xEDB88320 (the IEEE/zlib variant).
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view s);

std::string crc32_hex(std::string_view s);

}  // namespace saivla
