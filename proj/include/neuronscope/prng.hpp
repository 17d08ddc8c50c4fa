#pragma once

// Portable seeded randomness. SplitMix64 (Steele, Lea & Flood 2014) has a
// 64-bit state and fixed published constants, so fixtures generated here can
// be reproduced bit-for-bit by other implementations. std::shuffle and
// std::normal_distribution are implementation-defined and are not used.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace neuronscope {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound) by rejection; bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % bound;
    }

    // Standard normal via Box-Muller, cosine branch only: each call consumes
    // exactly two outputs of the generator.
    double gaussian() {
        const double u1 = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;  // (0,1)
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

// Fisher-Yates, walking from the back.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace neuronscope
