#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coverlab/commgraph.hpp"
#include "coverlab/rng.hpp"

namespace coverlab {

/// Architecture of the coverage policy: L graph-convolution layers of hop
/// order K with latent width lambda, followed by a per-node two-layer MLP.
struct GnnSpec {
    int layers = 2;
    int hops = 2;
    int input_dim = 3;
    int latent = 64;
    int mlp_hidden = 32;
    int output_dim = 2;

    void validate() const;
    std::size_t parameter_count() const;
    /// Input width of layer l (1-based).
    int layer_input_dim(int l) const { return l == 1 ? input_dim : latent; }

    friend bool operator==(const GnnSpec&, const GnnSpec&) = default;
};

/// Every learnable array of the policy. H[l-1][k] multiplies S^k z_{l-1} in layer l.
struct ParameterArrays {
    std::vector<std::vector<Eigen::MatrixXd>> H;
    Eigen::MatrixXd W1;  // latent x mlp_hidden
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;  // mlp_hidden x output_dim
    Eigen::VectorXd b2;

    /// Visits all arrays in a fixed order: H by layer then hop, W1, b1, W2, b2.
    template <class F>
    void for_each_array(F&& f) {
        for (auto& layer : H)
            for (auto& m : layer) f(std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
        f(std::span<double>(W1.data(), static_cast<std::size_t>(W1.size())));
        f(std::span<double>(b1.data(), static_cast<std::size_t>(b1.size())));
        f(std::span<double>(W2.data(), static_cast<std::size_t>(W2.size())));
        f(std::span<double>(b2.data(), static_cast<std::size_t>(b2.size())));
    }
    template <class F>
    void for_each_array(F&& f) const {
        for (const auto& layer : H)
            for (const auto& m : layer) f(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
        f(std::span<const double>(W1.data(), static_cast<std::size_t>(W1.size())));
        f(std::span<const double>(b1.data(), static_cast<std::size_t>(b1.size())));
        f(std::span<const double>(W2.data(), static_cast<std::size_t>(W2.size())));
        f(std::span<const double>(b2.data(), static_cast<std::size_t>(b2.size())));
    }

    std::size_t size() const;
    /// Flattened copy in for_each_array order.
    std::vector<double> flatten() const;
    bool all_finite() const;
    bool same_shape(const ParameterArrays& other) const;
};

struct GnnParams : ParameterArrays {
    GnnSpec spec;
};

struct GradientSet : ParameterArrays {};

/// Zero-valued arrays shaped like spec.
ParameterArrays zero_arrays(const GnnSpec& spec);
GradientSet zero_gradients(const GnnSpec& spec);

/// Glorot-uniform weights, zero biases.
GnnParams init_params(const GnnSpec& spec, Rng& rng);

/// Several disconnected graphs stacked into one signal. Graph g owns rows
/// [offsets[g], offsets[g + 1]) of `features`.
struct GraphBatch {
    std::vector<Eigen::MatrixXd> shift_operators;
    std::vector<Eigen::Index> offsets{0};
    Eigen::MatrixXd features;

    void reserve(std::size_t graphs, Eigen::Index nodes, Eigen::Index input_dim);
    void add(const Eigen::MatrixXd& S, const Eigen::MatrixXd& X);
    std::size_t graphs() const { return shift_operators.size(); }
    Eigen::Index nodes() const { return offsets.back(); }

    /// Applies the block-diagonal shift to a stacked signal.
    Eigen::MatrixXd shift(const Eigen::MatrixXd& Z) const;
};

/// Intermediates of one forward pass.
struct ForwardCache {
    GnnSpec spec;
    GraphBatch batch;
    std::vector<std::vector<Eigen::MatrixXd>> shifted;  // [l-1][k] = S^k z_{l-1}
    std::vector<Eigen::MatrixXd> pre;                   // [l-1] = sum_k S^k z_{l-1} H_{l,k}
    Eigen::MatrixXd latent;                             // z_L
    Eigen::MatrixXd hidden_pre;
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd actions;  // nodes x output_dim
};

ForwardCache forward(const GnnParams& params, GraphBatch batch);

/// Single-graph forward; returns the n x output_dim actions.
Eigen::MatrixXd forward(const GnnParams& params, const Eigen::MatrixXd& S, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr);

/// Exact gradients of sum(dL_dU .* U) with respect to every parameter.
GradientSet backward(const GnnParams& params, const ForwardCache& cache, const Eigen::MatrixXd& dL_dU);

/// theta <- theta - lr * grad.
void sgd_step(GnnParams& params, const GradientSet& grads, double lr);

enum class OptimizerKind { Sgd, Momentum, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

/// Stateful first-order optimizer. Sgd delegates to sgd_step.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, const GnnSpec& spec, double lr, double momentum = 0.9,
              double beta2 = 0.999, double epsilon = 1e-8);

    void step(GnnParams& params, const GradientSet& grads);
    OptimizerKind kind() const { return kind_; }

private:
    OptimizerKind kind_;
    double lr_;
    double beta1_;
    double beta2_;
    double epsilon_;
    long steps_ = 0;
    ParameterArrays first_;
    ParameterArrays second_;
};

/// Everything needed to run a trained policy.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    GnnParams params;
    double normalization = 1.0;
    bool normalization_fixed = false;  // false: recompute C for the environment it runs in
    EdgeWeighting weighting = EdgeWeighting::Distance;
    int train_robots = 0;
    double train_radius = 0.0;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace coverlab
