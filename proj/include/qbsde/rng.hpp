#pragma once

#include <cmath>
#include <cstdint>

namespace qbsde {

// Counter-based random number generation.  Every draw is a pure function of
// (master_seed, stream_id, path, counter), so path k's substream depends only
// on the seed and k: adding paths or reordering evaluation never perturbs
// existing draws, and the whole pipeline is reproducible bit-for-bit.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_words(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)) ^ splitmix64(b));
}

// Uniform in the open interval (0,1); never returns 0 or 1.
inline double u64_to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

struct RngPolicy {
    std::uint64_t master_seed = 0;
    // Substream selector for independent reruns sharing one master seed
    // (the representation ladder indexes its entries through this).
    std::uint64_t stream_id = 0;

    std::uint64_t word(std::uint64_t path, std::uint64_t counter) const {
        return splitmix64(mix_words(mix_words(master_seed, stream_id), path) ^ splitmix64(counter));
    }

    // Standard normal via Box-Muller on two hashed uniforms.
    double normal(std::uint64_t path, std::uint64_t counter) const {
        const double u1 = u64_to_unit(word(path, 2 * counter));
        const double u2 = u64_to_unit(word(path, 2 * counter + 1));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
};

} // namespace qbsde
