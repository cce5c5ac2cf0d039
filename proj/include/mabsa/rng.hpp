#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mabsa {

// splitmix64 step; good enough as a seed mixer and stream splitter.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a child seed from a base seed and a list of stream tags so that
// every (epoch, task, example) combination gets an independent stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = base;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t t : tags) {
        s ^= t + 0x9e3779b97f4a7c15ULL + (out << 6) + (out >> 2);
        out = splitmix64(s);
    }
    return out;
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags = {}) {
    return std::mt19937_64(derive_seed(base, tags));
}

// Uniform double in [0, 1) from raw engine output; avoids the
// implementation-defined std::uniform_real_distribution.
inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace mabsa
