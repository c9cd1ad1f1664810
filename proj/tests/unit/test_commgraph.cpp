#include <doctest.h>

#include <cmath>
#include <queue>

#include "coverlab/commgraph.hpp"
#include "coverlab/errors.hpp"
#include "unit/helpers.hpp"

using namespace coverlab;

namespace {

Eigen::MatrixXd permutation_matrix(const std::vector<int>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) P(perm[static_cast<std::size_t>(k)], k) = 1.0;
    return P;
}

std::vector<int> hop_distances(const std::vector<Edge>& edges, int n, int source) {
    std::vector<int> dist(static_cast<std::size_t>(n), -1);
    std::queue<int> q;
    dist[static_cast<std::size_t>(source)] = 0;
    q.push(source);
    while (!q.empty()) {
        const int a = q.front();
        q.pop();
        for (const Edge& e : edges) {
            const int b = e.i == a ? e.j : e.j == a ? e.i : -1;
            if (b >= 0 && dist[static_cast<std::size_t>(b)] < 0) {
                dist[static_cast<std::size_t>(b)] = dist[static_cast<std::size_t>(a)] + 1;
                q.push(b);
            }
        }
    }
    return dist;
}

struct RandomGraph {
    std::vector<Vec2> positions;
    std::vector<Edge> edges;
    CommGraph graph;
};

RandomGraph random_graph(const DensityGrid& grid, int n, Rng& rng) {
    RandomGraph out;
    out.positions = testing::random_positions(grid.rect, n, rng);
    out.edges = delaunay_neighbors(assign_ownership(out.positions, grid));
    out.graph = build_graph(out.positions, out.edges, default_normalization(grid.rect, n));
    return out;
}

}  // namespace

TEST_CASE("build_graph: empty edge set and a single hand-checked edge") {
    const std::vector<Vec2> p{{1, 1}, {1, 5}};
    const CommGraph empty = build_graph(p, {}, 0.25);
    CHECK(empty.S.isZero(0.0));

    const std::vector<Edge> edges{{0, 1}};
    const CommGraph g = build_graph(p, edges, 0.25);
    CHECK(g.S(0, 1) == 1.0);
    CHECK(g.S(1, 0) == 1.0);
    CHECK(g.S(0, 0) == 0.0);
    CHECK(g.S(1, 1) == 0.0);

    const CommGraph inv = build_graph(p, edges, 0.25, EdgeWeighting::InverseDistance);
    CHECK(inv.S(0, 1) == 0.0625);
    CHECK(without_edges(g).S.isZero(0.0));
    CHECK(without_edges(g).edges.empty());
}

TEST_CASE("default normalization is the inverse per-robot cell scale") {
    CHECK(default_normalization({8, 40}, 10) == doctest::Approx(1.0 / std::sqrt(32.0)));
    CHECK_THROWS_AS(default_normalization({8, 40}, 0), InputError);
}

TEST_CASE("edge weighting names round-trip") {
    for (auto w : {EdgeWeighting::Distance, EdgeWeighting::InverseDistance})
        CHECK(edge_weighting_from_string(to_string(w)) == w);
    CHECK_THROWS(edge_weighting_from_string("gaussian"));
}

TEST_CASE("node_features rows") {
    const std::vector<Vec2> p{{1, 2}, {3, 4}, {5, 6}};
    const std::vector<MassCentroid> cells{{0.0, {1, 2}}, {0.3, {3, 4}}, {0.2, {4.5, 7}}};
    const Eigen::MatrixXd X = node_features(cells, p);
    REQUIRE(X.rows() == 3);
    REQUIRE(X.cols() == 3);
    CHECK(X.row(0).isZero(0.0));
    CHECK(X(1, 0) == 0.0);
    CHECK(X(1, 1) == 0.0);
    CHECK(X(1, 2) == 0.3);
    CHECK(X(2, 0) == 0.5);
    CHECK(X(2, 1) == -1.0);
    CHECK(X(2, 2) == 0.2);
}

TEST_CASE("node_features agree with the geometry integrals") {
    const DensityField f = sample_field({8, 40}, 5, std::uint64_t{21});
    const DensityGrid coarse = rasterize(f, 0.05);
    const DensityGrid fine = rasterize(f, 0.025);
    Rng rng(4);
    const auto p = testing::random_positions(f.rect(), 10, rng);
    const Eigen::MatrixXd X = node_features(mass_and_centroids(p, coarse, assign_ownership(p, coarse), 2.0), p);
    for (int i = 0; i < 10; ++i) {
        const MassCentroid mc = mass_and_centroid(i, p, fine, assign_ownership(p, fine), 2.0);
        CHECK(X(i, 2) == doctest::Approx(mc.mass).epsilon(0.02));
        CHECK(std::abs(X(i, 0) - (p[static_cast<std::size_t>(i)].x - mc.centroid.x)) < 0.04);
        CHECK(std::abs(X(i, 1) - (p[static_cast<std::size_t>(i)].y - mc.centroid.y)) < 0.04);
    }
}

TEST_CASE("graph_shift: path graph by hand and shape errors") {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
    S(0, 1) = S(1, 0) = S(1, 2) = S(2, 1) = 1.0;
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd Y = graph_shift(S, Z);
    // Row i of S Z lists the neighbors of i.
    CHECK(Y.row(0) == Eigen::RowVector3d(0, 1, 0));
    CHECK(Y.row(1) == Eigen::RowVector3d(1, 0, 1));
    CHECK(Y.row(2) == Eigen::RowVector3d(0, 1, 0));
    CHECK(graph_shift(Eigen::MatrixXd::Zero(3, 3), Z).isZero(0.0));

    // Two hops from node 0 reach node 2.
    Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(3, 1);
    e0(0) = 1.0;
    const Eigen::MatrixXd two = graph_shift(S, graph_shift(S, e0));
    CHECK(two(0) == 1.0);
    CHECK(two(1) == 0.0);
    CHECK(two(2) == 1.0);

    CHECK_THROWS_AS(graph_shift(S, Eigen::MatrixXd::Zero(4, 2)), DimensionError);
    CHECK_THROWS_AS(graph_shift(Eigen::MatrixXd::Zero(3, 2), Z), DimensionError);
}

TEST_CASE("property: symmetry, zero diagonal, support equals edges") {
    const DensityGrid grid = rasterize(sample_field({8, 40}, 5, std::uint64_t{5}), 0.1);
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const RandomGraph rg = random_graph(grid, 2 + trial % 12, rng);
        const Eigen::MatrixXd& S = rg.graph.S;
        CHECK(S == S.transpose());
        CHECK(S.diagonal().isZero(0.0));
        CHECK((S.array() >= 0.0).all());
        int positive = 0;
        for (Eigen::Index i = 0; i < S.rows(); ++i)
            for (Eigen::Index j = i + 1; j < S.cols(); ++j) positive += S(i, j) > 0.0;
        CHECK(positive == static_cast<int>(rg.edges.size()));
        for (const Edge& e : rg.edges) CHECK(S(e.i, e.j) > 0.0);
    }
}

TEST_CASE("property: K-hop locality of repeated shifts") {
    const DensityGrid grid = rasterize(sample_field({8, 40}, 5, std::uint64_t{6}), 0.1);
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 10;
        const RandomGraph rg = random_graph(grid, n, rng);
        const int source = static_cast<int>(rng.below(n));
        const auto dist = hop_distances(rg.edges, n, source);
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, 2);
        z(source, 0) = 1.0;
        z(source, 1) = -2.0;
        for (int k = 1; k <= 4; ++k) {
            z = graph_shift(rg.graph.S, z);
            for (int i = 0; i < n; ++i)
                if (dist[static_cast<std::size_t>(i)] < 0 || dist[static_cast<std::size_t>(i)] > k)
                    CHECK(z.row(i).isZero(0.0));
        }
    }
}

TEST_CASE("property: relabeling robots conjugates S and commutes with the shift") {
    const DensityGrid grid = rasterize(sample_field({8, 40}, 5, std::uint64_t{7}), 0.05);
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 8;
        const RandomGraph rg = random_graph(grid, n, rng);
        const auto perm = testing::random_permutation(n, rng);
        std::vector<Vec2> q(rg.positions.size());
        for (int k = 0; k < n; ++k) q[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = rg.positions[static_cast<std::size_t>(k)];
        const auto edges_q = delaunay_neighbors(assign_ownership(q, grid));
        const CommGraph gq = build_graph(q, edges_q, default_normalization(grid.rect, n));
        const Eigen::MatrixXd P = permutation_matrix(perm);
        CHECK(gq.S == P * rg.graph.S * P.transpose());

        const Eigen::MatrixXd Z = Eigen::MatrixXd::Random(n, 3);
        // Relabeling reorders the floating-point sums, so equality is to rounding.
        const Eigen::MatrixXd diff = graph_shift(P * rg.graph.S * P.transpose(), P * Z) - P * graph_shift(rg.graph.S, Z);
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
    }
}
