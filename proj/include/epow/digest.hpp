#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace epow {

using Sha256Digest = std::array<uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);

/// 64 lowercase hex characters.
std::string sha256_hex(std::string_view bytes);

std::string to_hex(const uint8_t* data, size_t len);

/// CRC-32 (IEEE 802.3 polynomial), used for per-record checksums.
uint32_t crc32(std::string_view bytes);

}  // namespace epow
