#include "spamlens/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace spamlens {

std::array<std::uint8_t, 32> sha256_bytes(const void* data, std::size_t len) {
    std::array<std::uint8_t, 32> out{};
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1 || out_len != 32)
        throw std::runtime_error("sha256: digest computation failed");
    return out;
}

std::string to_hex(const std::array<std::uint8_t, 32>& digest) {
    static const char* hexdig = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(hexdig[b >> 4]);
        s.push_back(hexdig[b & 0xf]);
    }
    return s;
}

std::string sha256_hex(const void* data, std::size_t len) { return to_hex(sha256_bytes(data, len)); }

}  // namespace spamlens
