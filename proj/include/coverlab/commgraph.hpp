#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coverlab/field.hpp"
#include "coverlab/geometry.hpp"

namespace coverlab {

enum class EdgeWeighting {
    Distance,         // w_ij = C |p_i - p_j|
    InverseDistance,  // w_ij = C / |p_i - p_j|  (experiment flag)
};

std::string to_string(EdgeWeighting weighting);
EdgeWeighting edge_weighting_from_string(const std::string& name);

/// Weighted communication graph over the Delaunay edges.
/// S is dense, symmetric, nonnegative with zero diagonal; S(i,j) > 0 iff {i,j} is an edge.
struct CommGraph {
    int n = 0;
    std::vector<Edge> edges;
    Eigen::MatrixXd S;
};

/// C = 1 / sqrt(area / robots): the inverse of the typical per-robot cell scale.
double default_normalization(const Rect& rect, int robots);

CommGraph build_graph(std::span<const Vec2> positions, std::span<const Edge> edges, double normalization,
                      EdgeWeighting weighting = EdgeWeighting::Distance);

/// Same node set, no edges. Used to ablate communication.
CommGraph without_edges(const CommGraph& graph);

/// Row i = [(p_i - c_i).x, (p_i - c_i).y, m_i].
Eigen::MatrixXd node_features(std::span<const MassCentroid> cells, std::span<const Vec2> positions);

/// S * Z. Throws DimensionError on shape mismatch.
Eigen::MatrixXd graph_shift(const Eigen::MatrixXd& S, const Eigen::MatrixXd& Z);

}  // namespace coverlab
