// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfdet {

using rng_engine = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent child seed from a parent seed and a path of tags.
/// Generation of distinct samples uses distinct paths, never a shared engine.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (auto tag : path) s = mix64(s ^ mix64(tag + 0x632be59bd9b4e019ULL));
    return s;
}

inline rng_engine make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
    return rng_engine(derive_seed(seed, path));
}

/// Circular complex normal sample with E|z|^2 == variance.
template <typename T>
std::complex<T> complex_normal(rng_engine& rng, double variance = 1.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {static_cast<T>(re), static_cast<T>(im)};
}

inline double uniform(rng_engine& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(rng_engine& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace rfdet
