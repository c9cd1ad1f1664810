#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coverlab/rng.hpp"
#include "coverlab/vec2.hpp"

namespace coverlab {

/// Axis-aligned domain [0, width] x [0, length]. The long axis is y.
struct Rect {
    double width = 8.0;
    double length = 40.0;

    double area() const { return width * length; }
    bool contains(Vec2 q) const { return q.x >= 0.0 && q.x <= width && q.y >= 0.0 && q.y <= length; }
    Vec2 clamp(Vec2 q) const;
    void validate() const;
};

struct GaussianPeak {
    Vec2 center;
    double sigma = 2.0;
    double weight = 1.0;
};

inline constexpr double kDefaultGridResolution = 0.05;

/// Gaussian-mixture importance density, normalized so that its rasterized
/// integral over the domain at the default resolution is one.
class DensityField {
public:
    DensityField(Rect rect, std::vector<GaussianPeak> peaks);

    const Rect& rect() const { return rect_; }
    std::span<const GaussianPeak> peaks() const { return peaks_; }
    double normalization() const { return normalization_; }

    /// phi(q). Throws DomainError if q is outside the domain.
    double evaluate(Vec2 q) const;

    /// Unnormalized mixture sum; no domain check.
    double mixture(Vec2 q) const;

private:
    Rect rect_;
    std::vector<GaussianPeak> peaks_;
    double normalization_ = 1.0;
};

/// Density sampled at cell centers of a uniform grid covering the domain.
/// Cell (i, j) has center ((i + 0.5) h, (j + 0.5) h); storage is row-major in j.
struct DensityGrid {
    Rect rect;
    double h = kDefaultGridResolution;
    int nx = 0;
    int ny = 0;
    std::vector<double> values;

    double cell_area() const { return h * h; }
    std::size_t cells() const { return values.size(); }
    Vec2 cell_center(int i, int j) const { return {(i + 0.5) * h, (j + 0.5) * h}; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
    double integral() const;
};

/// Number of cells needed to cover `extent` at resolution h.
int cells_along(double extent, double h);

/// m peaks, sigmas uniform in [1.5, 2.5], equal weights, centers
/// rejection-sampled with pairwise separation >= 2 * max sigma.
DensityField sample_field(const Rect& rect, int m, Rng& rng);

/// Convenience: sample_field with a fresh generator seeded by `seed`.
DensityField sample_field(const Rect& rect, int m, std::uint64_t seed);

/// Grid values normalized so that sum * h^2 == 1.
DensityGrid rasterize(const DensityField& field, double h = kDefaultGridResolution);

// Field file: {width, length, peaks: [{cx, cy, sigma, weight}], seed}.
struct FieldFile {
    DensityField field;
    std::uint64_t seed = 0;
};

std::string field_to_json(const DensityField& field, std::uint64_t seed);
FieldFile field_from_json(const std::string& text);
void save_field(const std::filesystem::path& path, const DensityField& field, std::uint64_t seed);
FieldFile load_field(const std::filesystem::path& path);

}  // namespace coverlab
