#include "coverlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coverlab/errors.hpp"
#include "coverlab/log.hpp"

namespace coverlab {

namespace {

void warn_on_coincident(std::span<const Vec2> positions) {
    for (std::size_t a = 0; a < positions.size(); ++a)
        for (std::size_t b = a + 1; b < positions.size(); ++b)
            if (positions[a] == positions[b])
                logger().debug("robots {} and {} coincide; the lower index owns their shared cells", a, b);
}

struct CellSums {
    double mass = 0.0;
    double mx = 0.0;
    double my = 0.0;

    void add(double phi, Vec2 c) {
        mass += phi;
        mx += phi * c.x;
        my += phi * c.y;
    }

    MassCentroid finish(Vec2 p, double cell_area) const {
        const double m = mass * cell_area;
        if (m < kMassEpsilon) return {0.0, p};
        return {m, {mx / mass, my / mass}};
    }
};

// First and last cell index whose center can lie within r of coordinate c.
std::pair<int, int> cell_span(double c, double r, double h, int count) {
    const double lo = std::floor((c - r) / h - 0.5);
    const double hi = std::ceil((c + r) / h - 0.5);
    const int first = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(count - 1)));
    const int last = static_cast<int>(std::clamp(hi, 0.0, static_cast<double>(count - 1)));
    return {first, last};
}

void check_grids(const DensityGrid& density, const OwnershipGrid& ownership, std::size_t robots) {
    if (density.nx != ownership.nx || density.ny != ownership.ny)
        throw DimensionError("ownership grid does not match density grid");
    if (static_cast<std::size_t>(ownership.robots) != robots)
        throw DimensionError("ownership grid was built for a different team size");
}

}  // namespace

OwnershipGrid assign_ownership(std::span<const Vec2> positions, const DensityGrid& grid) {
    if (positions.empty()) throw InputError("ownership needs at least one robot");
    warn_on_coincident(positions);

    OwnershipGrid out;
    out.nx = grid.nx;
    out.ny = grid.ny;
    out.h = grid.h;
    out.robots = static_cast<int>(positions.size());
    out.owner.assign(grid.cells(), 0);

    std::vector<double> xs(static_cast<std::size_t>(grid.nx));
    for (int i = 0; i < grid.nx; ++i) xs[static_cast<std::size_t>(i)] = (i + 0.5) * grid.h;
    std::vector<double> best(xs.size());

    for (int j = 0; j < grid.ny; ++j) {
        const double y = (j + 0.5) * grid.h;
        int* row = out.owner.data() + static_cast<std::size_t>(j) * grid.nx;
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
        // Robots in increasing index with a strict comparison: the lowest index wins ties.
        for (std::size_t r = 0; r < positions.size(); ++r) {
            const double px = positions[r].x;
            const double dy = y - positions[r].y;
            const double dy2 = dy * dy;
            const int label = static_cast<int>(r);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double dx = xs[i] - px;
                const double d = dx * dx + dy2;
                if (d < best[i]) {
                    best[i] = d;
                    row[i] = label;
                }
            }
        }
    }
    return out;
}

std::vector<Edge> delaunay_neighbors(const OwnershipGrid& ownership) {
    const auto n = static_cast<std::size_t>(ownership.robots);
    std::vector<char> adjacent(n * n, 0);
    auto mark = [&](int a, int b) {
        if (a == b) return;
        adjacent[static_cast<std::size_t>(std::min(a, b)) * n + static_cast<std::size_t>(std::max(a, b))] = 1;
    };
    for (int j = 0; j < ownership.ny; ++j) {
        for (int i = 0; i < ownership.nx; ++i) {
            const int o = ownership.at(i, j);
            if (i + 1 < ownership.nx) mark(o, ownership.at(i + 1, j));
            if (j + 1 < ownership.ny) mark(o, ownership.at(i, j + 1));
        }
    }
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (adjacent[a * n + b]) edges.push_back({static_cast<int>(a), static_cast<int>(b)});
    return edges;
}

MassCentroid mass_and_centroid(int i, std::span<const Vec2> positions, const DensityGrid& density,
                               const OwnershipGrid& ownership, double r) {
    if (!(r > 0.0)) throw InputError("sensing radius must be positive");
    check_grids(density, ownership, positions.size());
    if (i < 0 || static_cast<std::size_t>(i) >= positions.size()) throw InputError("robot index out of range");

    const Vec2 p = positions[static_cast<std::size_t>(i)];
    const double r2 = r * r;
    const auto [i0, i1] = cell_span(p.x, r, density.h, density.nx);
    const auto [j0, j1] = cell_span(p.y, r, density.h, density.ny);
    CellSums sums;
    for (int j = j0; j <= j1; ++j) {
        for (int c = i0; c <= i1; ++c) {
            if (ownership.at(c, j) != i) continue;
            const Vec2 center = density.cell_center(c, j);
            if (squared_distance(center, p) <= r2) sums.add(density.at(c, j), center);
        }
    }
    return sums.finish(p, density.cell_area());
}

std::vector<MassCentroid> mass_and_centroids(std::span<const Vec2> positions, const DensityGrid& density,
                                             const OwnershipGrid& ownership, double r) {
    if (!(r > 0.0)) throw InputError("sensing radius must be positive");
    check_grids(density, ownership, positions.size());

    const double r2 = r * r;
    std::vector<CellSums> sums(positions.size());
    for (int j = 0; j < density.ny; ++j) {
        for (int c = 0; c < density.nx; ++c) {
            const int o = ownership.at(c, j);
            const Vec2 center = density.cell_center(c, j);
            if (squared_distance(center, positions[static_cast<std::size_t>(o)]) <= r2)
                sums[static_cast<std::size_t>(o)].add(density.at(c, j), center);
        }
    }
    std::vector<MassCentroid> out;
    out.reserve(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) out.push_back(sums[k].finish(positions[k], density.cell_area()));
    return out;
}

double coverage_reward(std::span<const Vec2> positions, const DensityGrid& density, const OwnershipGrid& ownership) {
    check_grids(density, ownership, positions.size());
    double sum = 0.0;
    for (int j = 0; j < density.ny; ++j) {
        for (int c = 0; c < density.nx; ++c) {
            const Vec2 p = positions[static_cast<std::size_t>(ownership.at(c, j))];
            sum += squared_distance(p, density.cell_center(c, j)) * density.at(c, j);
        }
    }
    return -sum * density.cell_area();
}

}  // namespace coverlab
