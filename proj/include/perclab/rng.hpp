#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string_view>

namespace perclab {

// Counter-based random streams. A stream is a 64-bit key; the variate at
// index c is the splitmix64 output of state key + (c+1)*GAMMA, so any draw
// can be produced by random access without touching shared state. Distinct
// keys give streams that are independent for all practical purposes, which
// is what makes replications, pair draws and grid pruning order-free.

constexpr std::uint64_t kSplitmixGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t key, std::uint64_t v) {
    return mix64(key ^ (v + 0x2545F4914F6CDD1Dull + (key << 6) + (key >> 2)));
}

inline std::uint64_t hash_label(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix64(h);
}

// Value of stream `key` at position `idx`.
inline std::uint64_t stream_at(std::uint64_t key, std::uint64_t idx) {
    return mix64(key + (idx + 1) * kSplitmixGamma);
}

// Strictly inside (0,1); the offset keeps both endpoints out so that
// comparisons u < p behave as expected for p = 0 and p = 1.
inline double to_unit_open(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

struct RngStream {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    static RngStream root(std::uint64_t master_seed) {
        return RngStream{mix64(master_seed ^ 0x9E3779B97F4A7C15ull), 0};
    }

    RngStream child(std::string_view purpose) const {
        return RngStream{hash_combine(key, hash_label(purpose)), 0};
    }
    RngStream child(std::uint64_t id) const {
        return RngStream{hash_combine(key, id), 0};
    }

    std::uint64_t next_u64() { return stream_at(key, counter++); }

    // Uniform on the open interval (0,1).
    double next_open01() { return to_unit_open(next_u64()); }

    // Uniform on [lo, hi).
    double next_range(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next_u64() >> 11) *
                                 (1.0 / 9007199254740992.0));
    }

    // Exact Poisson sampling. Large means are split into chunks small enough
    // for the product method; additivity keeps the draw exact.
    std::int64_t next_poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson mean must be >= 0");
        if (mean == 0.0) return 0;
        std::int64_t total = 0;
        double remaining = mean;
        constexpr double kChunk = 16.0;
        while (remaining > 0.0) {
            const double m = remaining > kChunk ? kChunk : remaining;
            remaining -= m;
            const double limit = std::exp(-m);
            double prod = 1.0;
            std::int64_t k = -1;
            do {
                ++k;
                prod *= next_open01();
            } while (prod > limit);
            total += k;
        }
        return total;
    }
};

// Uniform variate attached to the unordered vertex pair (i, j), i < j.
// Identical no matter which loop visits the pair.
inline double pair_uniform(std::uint64_t edge_key, std::uint32_t i, std::uint32_t j) {
    const std::uint64_t packed =
        (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
    return to_unit_open(stream_at(edge_key, packed));
}

}  // namespace perclab
