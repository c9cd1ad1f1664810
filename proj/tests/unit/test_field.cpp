#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "coverlab/errors.hpp"
#include "coverlab/field.hpp"
#include "unit/helpers.hpp"

using namespace coverlab;

namespace {

// Independent Riemann sum of the normalized mixture, straight from the peak list.
double riemann_integral(const DensityField& field, double h) {
    const int nx = static_cast<int>(std::lround(field.rect().width / h));
    const int ny = static_cast<int>(std::lround(field.rect().length / h));
    double sum = 0.0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double x = (i + 0.5) * h;
            const double y = (j + 0.5) * h;
            for (const auto& p : field.peaks()) {
                const double dx = x - p.center.x;
                const double dy = y - p.center.y;
                sum += p.weight * std::exp(-(dx * dx + dy * dy) / (2 * p.sigma * p.sigma));
            }
        }
    }
    return sum * h * h / field.normalization();
}

}  // namespace

TEST_CASE("evaluate: single peak maximum and symmetry") {
    const Rect rect{8, 40};
    const DensityField f(rect, {{{4, 20}, 2.0, 3.0}});
    CHECK(f.evaluate({4, 20}) == doctest::Approx(3.0 / f.normalization()).epsilon(1e-15));
    const double center = f.evaluate({4, 20});
    for (double x = 0.0; x <= 8.0; x += 0.25)
        for (double y = 0.0; y <= 40.0; y += 0.25) CHECK(f.evaluate({x, y}) <= center);

    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        const Vec2 d{rng.uniform(-3.5, 3.5), rng.uniform(-3.5, 3.5)};
        CHECK(f.evaluate(Vec2{4, 20} + d) == doctest::Approx(f.evaluate(Vec2{4, 20} - d)).epsilon(1e-14));
    }
}

TEST_CASE("evaluate: outside the domain is a domain error") {
    const DensityField f(Rect{8, 40}, {{{4, 20}, 2.0, 1.0}});
    CHECK_THROWS_AS(f.evaluate({-0.1, 5}), DomainError);
    CHECK_THROWS_AS(f.evaluate({4, 40.5}), DomainError);
    CHECK_NOTHROW(f.evaluate({0, 0}));
    CHECK_NOTHROW(f.evaluate({8, 40}));
}

TEST_CASE("evaluate is nonnegative and continuous") {
    const DensityField f = sample_field(Rect{8, 40}, 5, std::uint64_t{5});
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        const Vec2 q{rng.uniform(0.0, 7.99), rng.uniform(0.0, 39.99)};
        const double v = f.evaluate(q);
        CHECK(v >= 0.0);
        CHECK(std::abs(f.evaluate(q + Vec2{1e-7, 1e-7}) - v) < 1e-6);
    }
}

TEST_CASE("5-peak field from seed 42 integrates to one") {
    const DensityField f = sample_field(Rect{8, 40}, 5, std::uint64_t{42});
    const DensityGrid g = rasterize(f, 0.05);
    CHECK(g.integral() == doctest::Approx(1.0).epsilon(0.01));
    // The field's own normalization is fixed at h = 0.05; a 4x finer Riemann sum agrees within 0.5%.
    CHECK(riemann_integral(f, 0.05) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(riemann_integral(f, 0.0125) == doctest::Approx(1.0).epsilon(0.005));
    CHECK(std::abs(riemann_integral(f, 0.025) - riemann_integral(f, 0.05)) < 0.005);
}

TEST_CASE("sample_field: separation, sigma range, equal weights") {
    const Rect rect{8, 40};
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const DensityField f = sample_field(rect, 5, seed);
        const auto peaks = f.peaks();
        REQUIRE(peaks.size() == 5);
        double sigma_max = 0.0;
        for (const auto& p : peaks) {
            CHECK(p.sigma >= 1.5);
            CHECK(p.sigma <= 2.5);
            CHECK(p.weight == 1.0);
            CHECK(rect.contains(p.center));
            sigma_max = std::max(sigma_max, p.sigma);
        }
        for (std::size_t a = 0; a < peaks.size(); ++a)
            for (std::size_t b = a + 1; b < peaks.size(); ++b)
                CHECK(distance(peaks[a].center, peaks[b].center) >= 2 * sigma_max);
    }
}

TEST_CASE("sample_field: degenerate, deterministic and failing cases") {
    const Rect rect{8, 40};
    const DensityField one = sample_field(rect, 1, std::uint64_t{4});
    CHECK(one.peaks().size() == 1);
    CHECK(one.normalization() > 0.0);

    const DensityField a = sample_field(rect, 5, std::uint64_t{123});
    const DensityField b = sample_field(rect, 5, std::uint64_t{123});
    REQUIRE(a.peaks().size() == b.peaks().size());
    for (std::size_t k = 0; k < a.peaks().size(); ++k) {
        CHECK(a.peaks()[k].center == b.peaks()[k].center);
        CHECK(a.peaks()[k].sigma == b.peaks()[k].sigma);
    }
    CHECK(a.normalization() == b.normalization());

    CHECK_THROWS_AS(sample_field(rect, 0, std::uint64_t{1}), InputError);
    CHECK_THROWS_AS(sample_field(rect, 60, std::uint64_t{1}), GenerationError);
}

TEST_CASE("rasterize: grid geometry") {
    const DensityField f = sample_field(Rect{8, 40}, 5, std::uint64_t{42});
    const DensityGrid g = rasterize(f, 0.05);
    CHECK(g.nx == 160);
    CHECK(g.ny == 800);
    CHECK(g.cells() == 160u * 800u);
    CHECK(g.cell_area() == doctest::Approx(0.0025));
    CHECK(std::all_of(g.values.begin(), g.values.end(), [](double v) { return v >= 0.0; }));
    CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-12));

    const DensityGrid coarse = rasterize(f, 0.1);
    CHECK(coarse.nx == 80);
    CHECK(coarse.ny == 400);
    CHECK_THROWS_AS(rasterize(f, 0.0), InputError);
    CHECK_THROWS_AS(rasterize(f, 2.5), InputError);
}

TEST_CASE("rasterize: near-uniform field gives near-constant values") {
    const DensityField f = testing::near_uniform_field(Rect{8, 40});
    const DensityGrid g = rasterize(f, 0.1);
    const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
    CHECK(*hi / *lo < 1.0 + 1e-5);
    CHECK(*lo == doctest::Approx(1.0 / 320.0).epsilon(1e-5));
}

TEST_CASE("rasterized integral is stable under refinement") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const DensityField f = sample_field(Rect{8, 40}, 5, seed);
        CHECK(std::abs(riemann_integral(f, 0.025) - riemann_integral(f, 0.05)) < 0.005);
    }
}

TEST_CASE("field file round trip recomputes normalization") {
    const DensityField f = sample_field(Rect{8, 40}, 5, std::uint64_t{77});
    const FieldFile back = field_from_json(field_to_json(f, 77));
    CHECK(back.seed == 77);
    REQUIRE(back.field.peaks().size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(back.field.peaks()[k].center == f.peaks()[k].center);
        CHECK(back.field.peaks()[k].sigma == f.peaks()[k].sigma);
        CHECK(back.field.peaks()[k].weight == f.peaks()[k].weight);
    }
    CHECK(back.field.normalization() == f.normalization());
    CHECK(field_to_json(f, 77).find("normalization") == std::string::npos);
    CHECK_THROWS_AS(field_from_json("{\"width\": 8}"), FormatError);
}
