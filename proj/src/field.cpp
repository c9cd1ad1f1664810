#include "coverlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coverlab/errors.hpp"

namespace coverlab {

namespace {

constexpr double kSigmaMin = 1.5;
constexpr double kSigmaMax = 2.5;
constexpr int kMaxPlacementAttempts = 10'000;

// Unnormalized rasterized integral at resolution h.
double mixture_integral(const DensityField& field, double h) {
    const Rect& rect = field.rect();
    const int nx = cells_along(rect.width, h);
    const int ny = cells_along(rect.length, h);
    double sum = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) sum += field.mixture({(i + 0.5) * h, (j + 0.5) * h});
    return sum * h * h;
}

}  // namespace

Vec2 Rect::clamp(Vec2 q) const { return {std::clamp(q.x, 0.0, width), std::clamp(q.y, 0.0, length)}; }

void Rect::validate() const {
    if (!(width > 0.0) || !(length > 0.0) || !std::isfinite(width) || !std::isfinite(length))
        throw InputError("rect dimensions must be positive and finite");
}

int cells_along(double extent, double h) {
    // The small slack keeps 8 / 0.05 from rounding up to 161.
    return std::max(1, static_cast<int>(std::ceil(extent / h - 1e-9)));
}

DensityField::DensityField(Rect rect, std::vector<GaussianPeak> peaks) : rect_(rect), peaks_(std::move(peaks)) {
    rect_.validate();
    if (peaks_.empty()) throw InputError("density field needs at least one peak");
    for (const auto& p : peaks_) {
        if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw InputError("peak sigma must be positive");
        if (!(p.weight > 0.0) || !std::isfinite(p.weight)) throw InputError("peak weight must be positive");
        if (!rect_.contains(p.center)) throw InputError("peak center outside the domain");
    }
    normalization_ = mixture_integral(*this, kDefaultGridResolution);
    if (!(normalization_ > 0.0)) throw NumericError("density field integrates to zero");
}

double DensityField::mixture(Vec2 q) const {
    double sum = 0.0;
    for (const auto& p : peaks_) sum += p.weight * std::exp(-squared_distance(q, p.center) / (2.0 * p.sigma * p.sigma));
    return sum;
}

double DensityField::evaluate(Vec2 q) const {
    if (!rect_.contains(q)) throw DomainError("query point outside the density domain");
    return mixture(q) / normalization_;
}

double DensityGrid::integral() const {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum * cell_area();
}

DensityField sample_field(const Rect& rect, int m, Rng& rng) {
    rect.validate();
    if (m < 1) throw InputError("peak count must be at least 1");

    std::vector<double> sigmas(static_cast<std::size_t>(m));
    for (auto& s : sigmas) s = rng.uniform(kSigmaMin, kSigmaMax);
    const double separation = 2.0 * *std::max_element(sigmas.begin(), sigmas.end());

    std::vector<GaussianPeak> peaks;
    peaks.reserve(sigmas.size());
    int attempts = 0;
    for (double sigma : sigmas) {
        while (true) {
            if (++attempts > kMaxPlacementAttempts)
                throw GenerationError("could not place " + std::to_string(m) + " separated peaks in " +
                                      std::to_string(kMaxPlacementAttempts) + " attempts");
            const Vec2 c{rng.uniform(0.0, rect.width), rng.uniform(0.0, rect.length)};
            const bool clear = std::all_of(peaks.begin(), peaks.end(),
                                           [&](const GaussianPeak& p) { return distance(p.center, c) >= separation; });
            if (clear) {
                peaks.push_back({c, sigma, 1.0});
                break;
            }
        }
    }
    return DensityField(rect, std::move(peaks));
}

DensityField sample_field(const Rect& rect, int m, std::uint64_t seed) {
    Rng rng(seed);
    return sample_field(rect, m, rng);
}

DensityGrid rasterize(const DensityField& field, double h) {
    const Rect& rect = field.rect();
    if (!(h > 0.0) || h > std::min(rect.width, rect.length) / 4.0)
        throw InputError("grid resolution must be in (0, min(w, l) / 4]");
    DensityGrid grid;
    grid.rect = rect;
    grid.h = h;
    grid.nx = cells_along(rect.width, h);
    grid.ny = cells_along(rect.length, h);
    grid.values.resize(static_cast<std::size_t>(grid.nx) * grid.ny);
    double sum = 0.0;
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const double v = field.mixture(grid.cell_center(i, j)) / field.normalization();
            grid.values[static_cast<std::size_t>(j) * grid.nx + i] = v;
            sum += v;
        }
    }
    const double scale = 1.0 / (sum * grid.cell_area());
    for (auto& v : grid.values) v *= scale;
    return grid;
}

std::string field_to_json(const DensityField& field, std::uint64_t seed) {
    nlohmann::json doc;
    doc["width"] = field.rect().width;
    doc["length"] = field.rect().length;
    auto& peaks = doc["peaks"] = nlohmann::json::array();
    for (const auto& p : field.peaks())
        peaks.push_back({{"cx", p.center.x}, {"cy", p.center.y}, {"sigma", p.sigma}, {"weight", p.weight}});
    doc["seed"] = seed;
    return doc.dump(2) + "\n";
}

FieldFile field_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        Rect rect{doc.at("width").get<double>(), doc.at("length").get<double>()};
        std::vector<GaussianPeak> peaks;
        for (const auto& p : doc.at("peaks"))
            peaks.push_back({{p.at("cx").get<double>(), p.at("cy").get<double>()},
                             p.at("sigma").get<double>(),
                             p.at("weight").get<double>()});
        return {DensityField(rect, std::move(peaks)), doc.value("seed", std::uint64_t{0})};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid field file: ") + e.what());
    }
}

void save_field(const std::filesystem::path& path, const DensityField& field, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << field_to_json(field, seed);
    if (!out) throw IoError("failed writing " + path.string());
}

FieldFile load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return field_from_json(ss.str());
}

}  // namespace coverlab
