#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

namespace viasim::detail {

// Uniform in [0, 1) from the top 53 bits; stable across standard libraries,
// unlike the std distributions.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index in [0, n).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n)), n - 1);
}

// Fisher-Yates on top of uniform_index.
template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

} // namespace viasim::detail
