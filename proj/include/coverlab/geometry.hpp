#pragma once

#include <compare>
#include <limits>
#include <span>
#include <vector>

#include "coverlab/field.hpp"
#include "coverlab/vec2.hpp"

namespace coverlab {

inline constexpr double kMassEpsilon = 1e-12;
inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

/// Discretized Voronoi partition on the grid of a DensityGrid.
struct OwnershipGrid {
    int nx = 0;
    int ny = 0;
    double h = kDefaultGridResolution;
    int robots = 0;
    std::vector<int> owner;

    int at(int i, int j) const { return owner[static_cast<std::size_t>(j) * nx + i]; }
};

struct MassCentroid {
    double mass = 0.0;
    Vec2 centroid;
};

/// Undirected pair with i < j.
struct Edge {
    int i = 0;
    int j = 0;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Nearest robot per cell center, lowest index on exact ties.
OwnershipGrid assign_ownership(std::span<const Vec2> positions, const DensityGrid& grid);

/// Robots whose cells touch across a 4-adjacent cell boundary. Sorted.
std::vector<Edge> delaunay_neighbors(const OwnershipGrid& ownership);

/// Mass and centroid of robot i's cell restricted to its sensing disk of radius r.
/// Below kMassEpsilon the mass is reported as 0 and the centroid as the robot position.
MassCentroid mass_and_centroid(int i, std::span<const Vec2> positions, const DensityGrid& density,
                               const OwnershipGrid& ownership, double r);

/// mass_and_centroid for every robot in one pass over the grid. Results are
/// bit-identical to the per-robot version.
std::vector<MassCentroid> mass_and_centroids(std::span<const Vec2> positions, const DensityGrid& density,
                                             const OwnershipGrid& ownership, double r);

/// Locational reward J = -sum_cells |p_owner - center|^2 phi h^2  (always <= 0).
double coverage_reward(std::span<const Vec2> positions, const DensityGrid& density, const OwnershipGrid& ownership);

}  // namespace coverlab
