#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace spamlens {

// Sampling helpers built directly on the mt19937 output stream. The standard
// distributions are implementation-defined, so results would differ across
// standard libraries; these produce identical streams everywhere.

/// Uniform in [0,1) with 24 bits of precision.
inline float uniform_float(std::mt19937& rng) {
    return static_cast<float>(rng() >> 8) * 0x1.0p-24f;
}

/// Uniform in [0,1) with 53 bits of precision.
inline double uniform_double(std::mt19937& rng) {
    const std::uint64_t hi = static_cast<std::uint64_t>(rng() >> 5);  // 27 bits
    const std::uint64_t lo = static_cast<std::uint64_t>(rng() >> 6);  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

/// Uniform in [lo, hi).
inline float uniform_float(std::mt19937& rng, float lo, float hi) {
    return lo + (hi - lo) * uniform_float(rng);
}

inline double uniform_double(std::mt19937& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_double(rng);
}

/// Uniform integer in [0, n). Rejection sampling keeps the result unbiased.
inline std::uint32_t uniform_index(std::mt19937& rng, std::uint32_t n) {
    if (n == 0) return 0;
    const std::uint32_t limit = UINT32_MAX - UINT32_MAX % n;
    std::uint32_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

/// In-place Fisher-Yates shuffle with a portable index draw.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& items, std::mt19937& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, static_cast<std::uint32_t>(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Mixes a seed with stream identifiers so derived generators are decorrelated.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint32_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    std::uint64_t x = splitmix64(base ^ splitmix64(stream ^ splitmix64(index)));
    return static_cast<std::uint32_t>(x ^ (x >> 32));
}

}  // namespace spamlens
