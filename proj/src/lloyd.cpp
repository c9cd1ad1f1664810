#include "coverlab/lloyd.hpp"

#include <algorithm>
#include <cmath>

#include "coverlab/errors.hpp"

namespace coverlab {

void ControlLimits::validate() const {
    if (!(u_max > 0.0) || !std::isfinite(u_max)) throw InputError("u_max must be positive and finite");
}

Vec2 clip_norm(Vec2 u, double u_max) {
    const double n = norm(u);
    if (n <= u_max) return u;
    return u * (u_max / n);
}

Vec2 lloyd_control(const MassCentroid& cell, Vec2 p, const ControlLimits& limits, double gain) {
    const Vec2 raw = (gain * 2.0 * cell.mass) * (cell.centroid - p);
    return clip_norm(raw, limits.u_max);
}

}  // namespace coverlab

namespace coverlab {

LloydRun lloyd_descent(std::vector<Vec2> positions, const DensityGrid& grid, double r, const ControlLimits& limits,
                       double gain, int max_steps, double tolerance) {
    LloydRun run;
    for (int t = 0;; ++t) {
        const OwnershipGrid ownership = assign_ownership(positions, grid);
        const std::vector<MassCentroid> cells = mass_and_centroids(positions, grid, ownership, r);
        double worst = 0.0;
        for (std::size_t i = 0; i < positions.size(); ++i) worst = std::max(worst, distance(positions[i], cells[i].centroid));
        run.max_offset = worst;
        run.steps = t;
        if (worst < tolerance) {
            run.converged = true;
            break;
        }
        if (t == max_steps) break;
        for (std::size_t i = 0; i < positions.size(); ++i)
            positions[i] = grid.rect.clamp(positions[i] + lloyd_control(cells[i], positions[i], limits, gain));
    }
    run.positions = std::move(positions);
    return run;
}

}  // namespace coverlab
