#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace chromcc::rng {

// Unbiased integer in [0, n) by rejection. Used instead of
// std::uniform_int_distribution so sampled indices are identical across
// standard library implementations.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t v;
    do {
        v = gen();
    } while (v >= limit);
    return v % n;
}

// Fisher-Yates; full shuffle when take == values.size().
template <typename T>
void partial_shuffle(std::vector<T>& values, std::size_t take, std::mt19937_64& gen) {
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < take && i + 1 < n; ++i) {
        const std::size_t j = i + uniform_below(gen, n - i);
        std::swap(values[i], values[j]);
    }
}

template <typename T>
void shuffle(std::vector<T>& values, std::mt19937_64& gen) {
    partial_shuffle(values, values.size(), gen);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace chromcc::rng
