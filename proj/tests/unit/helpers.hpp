#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <vector>

#include "coverlab/field.hpp"
#include "coverlab/rng.hpp"
#include "coverlab/vec2.hpp"

namespace coverlab::testing {

inline std::vector<Vec2> random_positions(const Rect& rect, int n, Rng& rng) {
    std::vector<Vec2> out(static_cast<std::size_t>(n));
    for (auto& p : out) p = {rng.uniform(0.0, rect.width), rng.uniform(0.0, rect.length)};
    return out;
}

inline std::vector<int> random_permutation(int n, Rng& rng) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    return perm;
}

/// Single very wide peak: numerically a uniform density.
inline DensityField near_uniform_field(const Rect& rect) {
    return DensityField(rect, {{{rect.width / 2, rect.length / 2}, 1e4, 1.0}});
}

inline std::filesystem::path scratch_dir(const char* base, const char* name) {
    auto dir = std::filesystem::path(base) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace coverlab::testing
