#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace spamlens {

std::array<std::uint8_t, 32> sha256_bytes(const void* data, std::size_t len);
std::string sha256_hex(const void* data, std::size_t len);
std::string to_hex(const std::array<std::uint8_t, 32>& digest);

}  // namespace spamlens
