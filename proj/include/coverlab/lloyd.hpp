#pragma once

#include <vector>

#include "coverlab/field.hpp"
#include "coverlab/geometry.hpp"
#include "coverlab/vec2.hpp"

namespace coverlab {

/// Per-step displacement limit.
struct ControlLimits {
    double u_max = 0.5;

    void validate() const;
};

/// Scales u down to norm u_max if it is longer; direction is preserved.
Vec2 clip_norm(Vec2 u, double u_max);

/// u = gain * 2 m (c - p), norm-clipped to limits.u_max.
Vec2 lloyd_control(const MassCentroid& cell, Vec2 p, const ControlLimits& limits, double gain = 1.0);

}  // namespace coverlab

namespace coverlab {

struct LloydRun {
    std::vector<Vec2> positions;
    int steps = 0;             // steps actually taken
    double max_offset = 0.0;   // max_i |p_i - c_i| at the returned positions
    bool converged = false;    // max_offset < tolerance
};

/// Iterates partition -> truncated centroid -> Lloyd step -> clamp until
/// max_i |p_i - c_i| < tolerance or max_steps steps have been taken.
LloydRun lloyd_descent(std::vector<Vec2> positions, const DensityGrid& grid, double r, const ControlLimits& limits,
                       double gain, int max_steps, double tolerance);

}  // namespace coverlab
