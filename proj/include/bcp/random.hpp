#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bcp {

// Uniform double in [lo, hi) built from the top 53 bits of the generator.
// Used instead of std::uniform_real_distribution so that seeded runs produce
// the same stream on every standard library implementation.
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

// Uniform index in [0, n). Modulo bias is below 2^-32 for any n that fits in
// 32 bits, far under what any statistical test here can resolve.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

// In-place Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle_values(std::vector<T>& values, std::mt19937_64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace bcp
