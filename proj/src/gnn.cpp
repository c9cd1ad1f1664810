#include "coverlab/gnn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coverlab/errors.hpp"

namespace coverlab {

namespace {

std::vector<std::span<double>> spans_of(ParameterArrays& a) {
    std::vector<std::span<double>> out;
    a.for_each_array([&](std::span<double> s) { out.push_back(s); });
    return out;
}

std::vector<std::span<const double>> spans_of(const ParameterArrays& a) {
    std::vector<std::span<const double>> out;
    a.for_each_array([&](std::span<const double> s) { out.push_back(s); });
    return out;
}

void check_shapes(const GnnParams& params) {
    params.spec.validate();
    if (!params.same_shape(zero_arrays(params.spec)))
        throw ConsistencyError("parameter arrays do not match their GnnSpec");
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& a) { return a.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

void glorot_fill(Eigen::MatrixXd& m, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    double* p = m.data();
    for (Eigen::Index k = 0; k < m.size(); ++k) p[k] = rng.uniform(-a, a);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    auto out = nlohmann::json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
    return out;
}

void matrix_from_json(const nlohmann::json& j, Eigen::MatrixXd& m, const char* name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m.rows())
        throw FormatError(std::string("checkpoint array ") + name + " has the wrong row count");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols())
            throw FormatError(std::string("checkpoint array ") + name + " has the wrong column count");
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
}

void vector_from_json(const nlohmann::json& j, Eigen::VectorXd& v, const char* name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != v.size())
        throw FormatError(std::string("checkpoint array ") + name + " has the wrong length");
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = j[static_cast<std::size_t>(k)].get<double>();
}

}  // namespace

void GnnSpec::validate() const {
    if (layers < 1) throw InputError("GNN needs at least one layer");
    if (hops < 0) throw InputError("hop order must be nonnegative");
    if (input_dim != 3) throw InputError("GNN input dimension must be 3");
    if (output_dim != 2) throw InputError("GNN output dimension must be 2");
    if (latent < 1 || mlp_hidden < 1) throw InputError("GNN widths must be positive");
}

std::size_t GnnSpec::parameter_count() const {
    const auto K1 = static_cast<std::size_t>(hops + 1);
    const auto lat = static_cast<std::size_t>(latent);
    std::size_t n = K1 * static_cast<std::size_t>(input_dim) * lat;
    n += static_cast<std::size_t>(layers - 1) * K1 * lat * lat;
    n += lat * static_cast<std::size_t>(mlp_hidden) + static_cast<std::size_t>(mlp_hidden);
    n += static_cast<std::size_t>(mlp_hidden) * static_cast<std::size_t>(output_dim) +
         static_cast<std::size_t>(output_dim);
    return n;
}

std::size_t ParameterArrays::size() const {
    std::size_t n = 0;
    for_each_array([&](std::span<const double> s) { n += s.size(); });
    return n;
}

std::vector<double> ParameterArrays::flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each_array([&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

bool ParameterArrays::all_finite() const {
    bool ok = true;
    for_each_array([&](std::span<const double> s) {
        for (double v : s) ok = ok && std::isfinite(v);
    });
    return ok;
}

bool ParameterArrays::same_shape(const ParameterArrays& other) const {
    if (H.size() != other.H.size()) return false;
    for (std::size_t l = 0; l < H.size(); ++l) {
        if (H[l].size() != other.H[l].size()) return false;
        for (std::size_t k = 0; k < H[l].size(); ++k)
            if (H[l][k].rows() != other.H[l][k].rows() || H[l][k].cols() != other.H[l][k].cols()) return false;
    }
    return W1.rows() == other.W1.rows() && W1.cols() == other.W1.cols() && b1.size() == other.b1.size() &&
           W2.rows() == other.W2.rows() && W2.cols() == other.W2.cols() && b2.size() == other.b2.size();
}

ParameterArrays zero_arrays(const GnnSpec& spec) {
    spec.validate();
    ParameterArrays a;
    a.H.resize(static_cast<std::size_t>(spec.layers));
    for (int l = 1; l <= spec.layers; ++l) {
        auto& layer = a.H[static_cast<std::size_t>(l - 1)];
        for (int k = 0; k <= spec.hops; ++k) layer.push_back(Eigen::MatrixXd::Zero(spec.layer_input_dim(l), spec.latent));
    }
    a.W1 = Eigen::MatrixXd::Zero(spec.latent, spec.mlp_hidden);
    a.b1 = Eigen::VectorXd::Zero(spec.mlp_hidden);
    a.W2 = Eigen::MatrixXd::Zero(spec.mlp_hidden, spec.output_dim);
    a.b2 = Eigen::VectorXd::Zero(spec.output_dim);
    return a;
}

GradientSet zero_gradients(const GnnSpec& spec) { return GradientSet{zero_arrays(spec)}; }

GnnParams init_params(const GnnSpec& spec, Rng& rng) {
    GnnParams p{zero_arrays(spec), spec};
    for (auto& layer : p.H)
        for (auto& m : layer) glorot_fill(m, rng);
    glorot_fill(p.W1, rng);
    glorot_fill(p.W2, rng);
    return p;
}

void GraphBatch::reserve(std::size_t graphs, Eigen::Index nodes, Eigen::Index input_dim) {
    shift_operators.reserve(graphs);
    offsets.reserve(graphs + 1);
    features.resize(nodes, input_dim);
}

void GraphBatch::add(const Eigen::MatrixXd& S, const Eigen::MatrixXd& X) {
    if (S.rows() != S.cols() || S.rows() != X.rows())
        throw DimensionError("graph shift operator and signal disagree on node count");
    if (graphs() > 0 && features.cols() != X.cols())
        throw DimensionError("all graphs in a batch need the same feature width");
    const Eigen::Index start = offsets.back();
    const Eigen::Index end = start + X.rows();
    if (features.rows() < end || features.cols() != X.cols()) {
        Eigen::MatrixXd grown(std::max(end, 2 * features.rows()), X.cols());
        if (start > 0) grown.topRows(start) = features.topRows(start);
        features.swap(grown);
    }
    features.middleRows(start, X.rows()) = X;
    shift_operators.push_back(S);
    offsets.push_back(end);
}

Eigen::MatrixXd GraphBatch::shift(const Eigen::MatrixXd& Z) const {
    if (Z.rows() != nodes()) throw DimensionError("signal does not match the batch node count");
    Eigen::MatrixXd out(Z.rows(), Z.cols());
    for (std::size_t g = 0; g < graphs(); ++g) {
        const Eigen::Index off = offsets[g];
        const Eigen::Index n = offsets[g + 1] - off;
        out.middleRows(off, n).noalias() = shift_operators[g] * Z.middleRows(off, n);
    }
    return out;
}

ForwardCache forward(const GnnParams& params, GraphBatch batch) {
    check_shapes(params);
    const GnnSpec& spec = params.spec;
    if (batch.nodes() == 0) batch.features.resize(0, spec.input_dim);
    if (batch.features.rows() != batch.nodes()) batch.features.conservativeResize(batch.nodes(), Eigen::NoChange);
    if (batch.nodes() > 0 && batch.features.cols() != spec.input_dim)
        throw DimensionError("graph signal must have " + std::to_string(spec.input_dim) + " columns");
    if (!batch.features.allFinite()) throw NumericError("graph signal contains non-finite values");
    for (const auto& S : batch.shift_operators)
        if (!S.allFinite()) throw NumericError("shift operator contains non-finite values");

    ForwardCache cache;
    cache.spec = spec;
    cache.shifted.resize(static_cast<std::size_t>(spec.layers));
    cache.pre.resize(static_cast<std::size_t>(spec.layers));

    Eigen::MatrixXd z = batch.features;
    for (int l = 1; l <= spec.layers; ++l) {
        const auto li = static_cast<std::size_t>(l - 1);
        auto& ys = cache.shifted[li];
        ys.resize(static_cast<std::size_t>(spec.hops + 1));
        ys[0] = std::move(z);
        for (int k = 1; k <= spec.hops; ++k) ys[static_cast<std::size_t>(k)] = batch.shift(ys[static_cast<std::size_t>(k - 1)]);

        Eigen::MatrixXd& a = cache.pre[li];
        a.noalias() = ys[0] * params.H[li][0];
        for (int k = 1; k <= spec.hops; ++k)
            a.noalias() += ys[static_cast<std::size_t>(k)] * params.H[li][static_cast<std::size_t>(k)];
        z = relu(a);
    }
    cache.latent = std::move(z);

    cache.hidden_pre.noalias() = cache.latent * params.W1;
    cache.hidden_pre.rowwise() += params.b1.transpose();
    cache.hidden = relu(cache.hidden_pre);
    cache.actions.noalias() = cache.hidden * params.W2;
    cache.actions.rowwise() += params.b2.transpose();
    cache.batch = std::move(batch);
    return cache;
}

Eigen::MatrixXd forward(const GnnParams& params, const Eigen::MatrixXd& S, const Eigen::MatrixXd& X,
                        ForwardCache* cache) {
    if (X.cols() != params.spec.input_dim)
        throw DimensionError("graph signal must have " + std::to_string(params.spec.input_dim) + " columns");
    GraphBatch batch;
    batch.add(S, X);
    ForwardCache c = forward(params, std::move(batch));
    Eigen::MatrixXd actions = c.actions;
    if (cache != nullptr) *cache = std::move(c);
    return actions;
}

GradientSet backward(const GnnParams& params, const ForwardCache& cache, const Eigen::MatrixXd& dL_dU) {
    check_shapes(params);
    if (!(cache.spec == params.spec)) throw ConsistencyError("forward cache was produced by a different GnnSpec");
    if (cache.shifted.size() != static_cast<std::size_t>(params.spec.layers))
        throw ConsistencyError("forward cache is incomplete");
    if (dL_dU.rows() != cache.actions.rows() || dL_dU.cols() != cache.actions.cols())
        throw DimensionError("upstream gradient shape does not match the actions");

    const GnnSpec& spec = params.spec;
    GradientSet g = zero_gradients(spec);

    g.W2.noalias() = cache.hidden.transpose() * dL_dU;
    g.b2 = dL_dU.colwise().sum().transpose();
    Eigen::MatrixXd dh = (dL_dU * params.W2.transpose()).cwiseProduct(relu_mask(cache.hidden_pre));
    g.W1.noalias() = cache.latent.transpose() * dh;
    g.b1 = dh.colwise().sum().transpose();
    Eigen::MatrixXd dz = dh * params.W1.transpose();

    for (int l = spec.layers; l >= 1; --l) {
        const auto li = static_cast<std::size_t>(l - 1);
        const Eigen::MatrixXd da = dz.cwiseProduct(relu_mask(cache.pre[li]));
        for (int k = 0; k <= spec.hops; ++k) {
            const auto ki = static_cast<std::size_t>(k);
            g.H[li][ki].noalias() = cache.shifted[li][ki].transpose() * da;
        }
        if (l == 1) break;
        // dz_{l-1} = sum_k (S^k)^T da H_k^T; S is symmetric, evaluated by Horner's rule.
        dz.noalias() = da * params.H[li][static_cast<std::size_t>(spec.hops)].transpose();
        for (int k = spec.hops - 1; k >= 0; --k) {
            Eigen::MatrixXd shifted = cache.batch.shift(dz);
            shifted.noalias() += da * params.H[li][static_cast<std::size_t>(k)].transpose();
            dz.swap(shifted);
        }
    }
    return g;
}

void sgd_step(GnnParams& params, const GradientSet& grads, double lr) {
    if (!params.same_shape(grads)) throw ConsistencyError("gradient shapes do not match parameters");
    auto p = spans_of(static_cast<ParameterArrays&>(params));
    const auto d = spans_of(static_cast<const ParameterArrays&>(grads));
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t k = 0; k < p[a].size(); ++k) p[a][k] -= lr * d[a][k];
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::Adam: return "adam";
    }
    return "sgd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "momentum") return OptimizerKind::Momentum;
    if (name == "adam") return OptimizerKind::Adam;
    throw InputError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, const GnnSpec& spec, double lr, double momentum, double beta2,
                     double epsilon)
    : kind_(kind), lr_(lr), beta1_(momentum), beta2_(beta2), epsilon_(epsilon),
      first_(zero_arrays(spec)), second_(zero_arrays(spec)) {
    if (!(lr >= 0.0)) throw InputError("learning rate must be nonnegative");
}

void Optimizer::step(GnnParams& params, const GradientSet& grads) {
    if (kind_ == OptimizerKind::Sgd) {
        sgd_step(params, grads, lr_);
        return;
    }
    if (!params.same_shape(grads) || !params.same_shape(first_))
        throw ConsistencyError("optimizer state does not match parameters");
    ++steps_;
    auto p = spans_of(static_cast<ParameterArrays&>(params));
    const auto d = spans_of(static_cast<const ParameterArrays&>(grads));
    auto m = spans_of(first_);
    auto v = spans_of(second_);
    if (kind_ == OptimizerKind::Momentum) {
        for (std::size_t a = 0; a < p.size(); ++a)
            for (std::size_t k = 0; k < p[a].size(); ++k) {
                m[a][k] = beta1_ * m[a][k] + d[a][k];
                p[a][k] -= lr_ * m[a][k];
            }
        return;
    }
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t k = 0; k < p[a].size(); ++k) {
            const double gk = d[a][k];
            m[a][k] = beta1_ * m[a][k] + (1.0 - beta1_) * gk;
            v[a][k] = beta2_ * v[a][k] + (1.0 - beta2_) * gk * gk;
            p[a][k] -= lr_ * (m[a][k] / c1) / (std::sqrt(v[a][k] / c2) + epsilon_);
        }
}

std::string checkpoint_to_json(const Checkpoint& cp) {
    const GnnSpec& s = cp.params.spec;
    nlohmann::json doc;
    doc["format"] = "coverlab-checkpoint";
    doc["format_version"] = Checkpoint::kFormatVersion;
    doc["spec"] = {{"layers", s.layers}, {"hops", s.hops},         {"input_dim", s.input_dim},
                   {"latent", s.latent}, {"mlp_hidden", s.mlp_hidden}, {"output_dim", s.output_dim}};
    doc["normalization"] = cp.normalization;
    doc["normalization_fixed"] = cp.normalization_fixed;
    doc["weighting"] = to_string(cp.weighting);
    doc["train_env"] = {{"robots", cp.train_robots}, {"radius", cp.train_radius}};
    nlohmann::json H = nlohmann::json::array();
    for (const auto& layer : cp.params.H) {
        nlohmann::json hops = nlohmann::json::array();
        for (const auto& m : layer) hops.push_back(matrix_to_json(m));
        H.push_back(std::move(hops));
    }
    doc["params"] = {{"H", std::move(H)},
                     {"W1", matrix_to_json(cp.params.W1)},
                     {"b1", vector_to_json(cp.params.b1)},
                     {"W2", matrix_to_json(cp.params.W2)},
                     {"b2", vector_to_json(cp.params.b2)}};
    return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.value("format", std::string{}) != "coverlab-checkpoint") throw FormatError("not a coverlab checkpoint");
        const int version = doc.at("format_version").get<int>();
        if (version != Checkpoint::kFormatVersion)
            throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(Checkpoint::kFormatVersion) + ")");
        const auto& js = doc.at("spec");
        GnnSpec spec;
        spec.layers = js.at("layers").get<int>();
        spec.hops = js.at("hops").get<int>();
        spec.input_dim = js.at("input_dim").get<int>();
        spec.latent = js.at("latent").get<int>();
        spec.mlp_hidden = js.at("mlp_hidden").get<int>();
        spec.output_dim = js.at("output_dim").get<int>();

        Checkpoint cp;
        cp.params = GnnParams{zero_arrays(spec), spec};
        cp.normalization = doc.at("normalization").get<double>();
        cp.normalization_fixed = doc.at("normalization_fixed").get<bool>();
        cp.weighting = edge_weighting_from_string(doc.at("weighting").get<std::string>());
        cp.train_robots = doc.at("train_env").at("robots").get<int>();
        cp.train_radius = doc.at("train_env").at("radius").get<double>();

        const auto& jp = doc.at("params");
        const auto& H = jp.at("H");
        if (!H.is_array() || H.size() != cp.params.H.size()) throw FormatError("checkpoint layer count mismatch");
        for (std::size_t l = 0; l < H.size(); ++l) {
            if (!H[l].is_array() || H[l].size() != cp.params.H[l].size())
                throw FormatError("checkpoint hop count mismatch");
            for (std::size_t k = 0; k < H[l].size(); ++k) matrix_from_json(H[l][k], cp.params.H[l][k], "H");
        }
        matrix_from_json(jp.at("W1"), cp.params.W1, "W1");
        vector_from_json(jp.at("b1"), cp.params.b1, "b1");
        matrix_from_json(jp.at("W2"), cp.params.W2, "W2");
        vector_from_json(jp.at("b2"), cp.params.b2, "b2");
        if (!cp.params.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << checkpoint_to_json(checkpoint);
    if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace coverlab
