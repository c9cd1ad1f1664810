#include "coverlab/commgraph.hpp"

#include <cmath>

#include "coverlab/errors.hpp"
#include "coverlab/log.hpp"

namespace coverlab {

std::string to_string(EdgeWeighting weighting) {
    return weighting == EdgeWeighting::Distance ? "distance" : "inverse_distance";
}

EdgeWeighting edge_weighting_from_string(const std::string& name) {
    if (name == "distance") return EdgeWeighting::Distance;
    if (name == "inverse_distance") return EdgeWeighting::InverseDistance;
    throw InputError("unknown edge weighting '" + name + "'");
}

double default_normalization(const Rect& rect, int robots) {
    if (robots < 1) throw InputError("team size must be positive");
    return 1.0 / std::sqrt(rect.area() / robots);
}

CommGraph build_graph(std::span<const Vec2> positions, std::span<const Edge> edges, double normalization,
                      EdgeWeighting weighting) {
    if (!(normalization > 0.0)) throw InputError("graph normalization must be positive");
    const auto n = static_cast<Eigen::Index>(positions.size());
    CommGraph g;
    g.n = static_cast<int>(n);
    g.S = Eigen::MatrixXd::Zero(n, n);
    for (const Edge& e : edges) {
        if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n || e.i == e.j)
            throw InputError("edge references an invalid node pair");
        const double d = distance(positions[static_cast<std::size_t>(e.i)], positions[static_cast<std::size_t>(e.j)]);
        if (d == 0.0) {
            // A zero weight would make the edge invisible in S; drop it explicitly.
            logger().debug("dropping edge between coincident robots {} and {}", e.i, e.j);
            continue;
        }
        const double w = weighting == EdgeWeighting::Distance ? normalization * d : normalization / d;
        g.S(e.i, e.j) = w;
        g.S(e.j, e.i) = w;
        g.edges.push_back(e.i < e.j ? e : Edge{e.j, e.i});
    }
    return g;
}

CommGraph without_edges(const CommGraph& graph) {
    CommGraph g;
    g.n = graph.n;
    g.S = Eigen::MatrixXd::Zero(graph.n, graph.n);
    return g;
}

Eigen::MatrixXd node_features(std::span<const MassCentroid> cells, std::span<const Vec2> positions) {
    if (cells.size() != positions.size()) throw DimensionError("one mass/centroid per robot required");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(cells.size()), 3);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Vec2 offset = positions[i] - cells[i].centroid;
        const auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = offset.x;
        X(r, 1) = offset.y;
        X(r, 2) = cells[i].mass;
    }
    return X;
}

Eigen::MatrixXd graph_shift(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Z) {
    if (S.rows() != S.cols() || S.cols() != Z.rows())
        throw DimensionError("graph shift: S is " + std::to_string(S.rows()) + "x" + std::to_string(S.cols()) +
                             ", signal has " + std::to_string(Z.rows()) + " rows");
    return S * Z;
}

}  // namespace coverlab
