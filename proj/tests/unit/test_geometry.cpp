#include <doctest.h>

#include <cmath>
#include <set>

#include "coverlab/errors.hpp"
#include "coverlab/geometry.hpp"
#include "unit/helpers.hpp"

using namespace coverlab;

namespace {

const Rect kRect{8, 40};

int brute_force_owner(const std::vector<Vec2>& positions, Vec2 c) {
    int best = 0;
    double best_d = INFINITY;
    for (std::size_t r = 0; r < positions.size(); ++r) {
        const double dx = c.x - positions[r].x;
        const double dy = c.y - positions[r].y;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(r);
        }
    }
    return best;
}

// Footprint-truncated cost of serving robot i's cell set from point x.
double footprint_cost(int i, const std::vector<Vec2>& positions, const DensityGrid& g, const OwnershipGrid& o,
                      double r, Vec2 x) {
    double sum = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int c = 0; c < g.nx; ++c) {
            const Vec2 q = g.cell_center(c, j);
            if (o.at(c, j) == i && distance(q, positions[static_cast<std::size_t>(i)]) <= r)
                sum += squared_distance(x, q) * g.at(c, j) * g.cell_area();
        }
    return sum;
}

}  // namespace

TEST_CASE("ownership: single robot owns everything") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{1}), 0.1);
    const std::vector<Vec2> p{{3, 7}};
    const OwnershipGrid o = assign_ownership(p, g);
    CHECK(std::all_of(o.owner.begin(), o.owner.end(), [](int v) { return v == 0; }));
    CHECK(delaunay_neighbors(o).empty());
}

TEST_CASE("ownership: mirror-symmetric robots give a mirrored partition") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{1}), 0.05);
    const std::vector<Vec2> p{{2.0, 13.0}, {6.0, 13.0}};
    const OwnershipGrid o = assign_ownership(p, g);
    for (int j = 0; j < g.ny; j += 7)
        for (int i = 0; i < g.nx; ++i) CHECK(o.at(i, j) == 1 - o.at(g.nx - 1 - i, j));
}

TEST_CASE("ownership matches brute-force nearest robot exactly") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{2}), 0.05);
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const auto p = testing::random_positions(kRect, 4, rng);
        const OwnershipGrid o = assign_ownership(p, g);
        int mismatches = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) mismatches += o.at(i, j) != brute_force_owner(p, g.cell_center(i, j));
        CHECK(mismatches == 0);
    }
}

TEST_CASE("ownership: exact ties go to the lowest index") {
    const DensityGrid g = rasterize(testing::near_uniform_field(kRect), 0.5);
    const std::vector<Vec2> p{{4, 4}, {4, 4}};
    const OwnershipGrid o = assign_ownership(p, g);
    CHECK(std::all_of(o.owner.begin(), o.owner.end(), [](int v) { return v == 0; }));
    CHECK(delaunay_neighbors(o).empty());

    // Cell centers at y = 10.25 are exactly equidistant from these two robots.
    const std::vector<Vec2> q{{2.25, 11.25}, {2.25, 9.25}};
    const OwnershipGrid o2 = assign_ownership(q, g);
    for (int i = 0; i < g.nx; ++i) CHECK(o2.at(i, 20) == 0);
    CHECK(o2.at(4, 19) == 1);
    CHECK(o2.at(4, 21) == 0);
}

TEST_CASE("delaunay: collinear robots on the long axis form a path") {
    const DensityGrid g = rasterize(testing::near_uniform_field(kRect), 0.05);
    const std::vector<Vec2> p{{4, 5}, {4, 20}, {4, 35}};
    const OwnershipGrid o = assign_ownership(p, g);
    const auto edges = delaunay_neighbors(o);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0] == Edge{0, 1});
    CHECK(edges[1] == Edge{1, 2});
}

TEST_CASE("delaunay: edges are symmetric, irreflexive and match a cell-adjacency scan") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{3}), 0.1);
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = testing::random_positions(kRect, 2 + trial, rng);
        const OwnershipGrid o = assign_ownership(p, g);
        std::set<std::pair<int, int>> scan;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int a = brute_force_owner(p, g.cell_center(i, j));
                if (i + 1 < g.nx) {
                    const int b = brute_force_owner(p, g.cell_center(i + 1, j));
                    if (a != b) scan.insert({std::min(a, b), std::max(a, b)});
                }
                if (j + 1 < g.ny) {
                    const int b = brute_force_owner(p, g.cell_center(i, j + 1));
                    if (a != b) scan.insert({std::min(a, b), std::max(a, b)});
                }
            }
        const auto edges = delaunay_neighbors(o);
        std::set<std::pair<int, int>> got;
        for (const Edge& e : edges) {
            CHECK(e.i < e.j);
            got.insert({e.i, e.j});
        }
        CHECK(got.size() == edges.size());
        CHECK(got == scan);
    }
}

TEST_CASE("mass/centroid: empty footprint convention") {
    const DensityField f(kRect, {{{4, 35}, 1.5, 1.0}});
    const DensityGrid g = rasterize(f, 0.05);
    const std::vector<Vec2> p{{4, 2}, {4, 34}};
    const OwnershipGrid o = assign_ownership(p, g);
    const MassCentroid mc = mass_and_centroid(0, p, g, o, 2.0);
    CHECK(mc.mass == 0.0);
    CHECK(mc.centroid == p[0]);
    CHECK(mass_and_centroid(1, p, g, o, 2.0).mass > 0.1);
    CHECK_THROWS_AS(mass_and_centroid(0, p, g, o, 0.0), InputError);
}

TEST_CASE("mass/centroid: uniform density, unbounded radius, centroid of the rectangle") {
    const DensityGrid g = rasterize(testing::near_uniform_field(kRect), 0.05);
    const std::vector<Vec2> p{{1, 3}};
    const OwnershipGrid o = assign_ownership(p, g);
    for (double r : {41.0, kInfiniteRadius}) {
        const MassCentroid mc = mass_and_centroid(0, p, g, o, r);
        CHECK(mc.mass == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(mc.centroid.x - 4.0) < 2 * g.h);
        CHECK(std::abs(mc.centroid.y - 20.0) < 2 * g.h);
    }
}

TEST_CASE("mass/centroid: per-robot and one-pass versions agree bit for bit") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{8}), 0.05);
    Rng rng(5);
    for (double r : {1.0, 2.0, 3.5, kInfiniteRadius}) {
        const auto p = testing::random_positions(kRect, 10, rng);
        const OwnershipGrid o = assign_ownership(p, g);
        const auto all = mass_and_centroids(p, g, o, r);
        for (int i = 0; i < 10; ++i) {
            const MassCentroid one = mass_and_centroid(i, p, g, o, r);
            CHECK(one.mass == all[static_cast<std::size_t>(i)].mass);
            CHECK(one.centroid == all[static_cast<std::size_t>(i)].centroid);
        }
    }
}

TEST_CASE("mass/centroid and reward are stable under grid refinement") {
    const DensityField f = sample_field(kRect, 5, std::uint64_t{11});
    const DensityGrid coarse = rasterize(f, 0.05);
    const DensityGrid fine = rasterize(f, 0.025);
    Rng rng(31);
    for (int trial = 0; trial < 3; ++trial) {
        const auto p = testing::random_positions(kRect, 10, rng);
        const OwnershipGrid oc = assign_ownership(p, coarse);
        const OwnershipGrid of = assign_ownership(p, fine);
        const auto mc = mass_and_centroids(p, coarse, oc, 2.0);
        const auto mf = mass_and_centroids(p, fine, of, 2.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(std::abs(mc[i].mass - mf[i].mass) <= 0.02 * mf[i].mass + 1e-9);
            CHECK(distance(mc[i].centroid, mf[i].centroid) <= 0.02 * 2.0);
        }
        const double jc = coverage_reward(p, coarse, oc);
        const double jf = coverage_reward(p, fine, of);
        CHECK(std::abs(jc - jf) <= 0.02 * std::abs(jf));
    }
}

TEST_CASE("mass/centroid: masses partition the unit integral") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{12}), 0.05);
    Rng rng(2);
    const auto p = testing::random_positions(kRect, 10, rng);
    const OwnershipGrid o = assign_ownership(p, g);
    double total = 0.0;
    for (const auto& mc : mass_and_centroids(p, g, o, kInfiniteRadius)) total += mc.mass;
    CHECK(total == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("reward: point mass served exactly") {
    // Sigma far below the cell size concentrates all grid mass in one cell.
    const DensityField f(kRect, {{{4.025, 20.025}, 0.002, 1.0}});
    const DensityGrid g = rasterize(f, 0.05);
    const std::vector<Vec2> p{{4.025, 20.025}, {1, 1}};
    const double J = coverage_reward(p, g, assign_ownership(p, g));
    CHECK(J <= 0.0);
    CHECK(J > -1e-9);
}

TEST_CASE("reward: single isotropic Gaussian served from its centroid") {
    const double sigma = 1.5;
    const DensityField f(kRect, {{{4, 20}, sigma, 1.0}});
    const DensityGrid g = rasterize(f, 0.05);
    std::vector<Vec2> p{{4, 20}};
    const OwnershipGrid o = assign_ownership(p, g);
    p[0] = mass_and_centroid(0, p, g, o, kInfiniteRadius).centroid;
    const double J = coverage_reward(p, g, o);
    // Second moment of an isotropic Gaussian about its mean: 2 sigma^2.
    CHECK(J == doctest::Approx(-2 * sigma * sigma).epsilon(0.05));
}

TEST_CASE("reward is nonpositive for random configurations") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{13}), 0.1);
    Rng rng(44);
    for (int k = 0; k < 20; ++k) {
        const auto p = testing::random_positions(kRect, 1 + k % 10, rng);
        CHECK(coverage_reward(p, g, assign_ownership(p, g)) <= 0.0);
    }
}

TEST_CASE("property: moving to the truncated centroid never increases the footprint cost") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{14}), 0.1);
    Rng rng(61);
    for (int trial = 0; trial < 5; ++trial) {
        const auto p = testing::random_positions(kRect, 6, rng);
        const OwnershipGrid o = assign_ownership(p, g);
        for (int i = 0; i < 6; ++i) {
            const MassCentroid mc = mass_and_centroid(i, p, g, o, 2.5);
            const double at_p = footprint_cost(i, p, g, o, 2.5, p[static_cast<std::size_t>(i)]);
            const double at_c = footprint_cost(i, p, g, o, 2.5, mc.centroid);
            CHECK(at_c <= at_p + 1e-15);
        }
    }
}

TEST_CASE("property: relabeling robots permutes every per-robot output") {
    const DensityGrid g = rasterize(sample_field(kRect, 5, std::uint64_t{15}), 0.05);
    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 8;
        const auto p = testing::random_positions(kRect, n, rng);
        const auto perm = testing::random_permutation(n, rng);
        std::vector<Vec2> q(p.size());
        for (int k = 0; k < n; ++k) q[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = p[static_cast<std::size_t>(k)];

        const OwnershipGrid op = assign_ownership(p, g);
        const OwnershipGrid oq = assign_ownership(q, g);
        int mismatches = 0;
        for (std::size_t c = 0; c < op.owner.size(); ++c)
            mismatches += perm[static_cast<std::size_t>(op.owner[c])] != oq.owner[c];
        CHECK(mismatches == 0);

        std::set<Edge> ep, eq;
        for (const Edge& e : delaunay_neighbors(op)) {
            const int a = perm[static_cast<std::size_t>(e.i)], b = perm[static_cast<std::size_t>(e.j)];
            ep.insert({std::min(a, b), std::max(a, b)});
        }
        for (const Edge& e : delaunay_neighbors(oq)) eq.insert(e);
        CHECK(ep == eq);

        const auto mp = mass_and_centroids(p, g, op, 2.0);
        const auto mq = mass_and_centroids(q, g, oq, 2.0);
        for (int k = 0; k < n; ++k) {
            CHECK(mp[static_cast<std::size_t>(k)].mass == mq[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])].mass);
            CHECK(mp[static_cast<std::size_t>(k)].centroid == mq[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])].centroid);
        }
        CHECK(coverage_reward(p, g, op) == coverage_reward(q, g, oq));
    }
}
