#include "coverlab/imitation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "coverlab/errors.hpp"
#include "coverlab/log.hpp"
#include "coverlab/parallel.hpp"

namespace coverlab {

namespace {

constexpr char kDatasetMagic[8] = {'C', 'O', 'V', 'L', 'D', 'S', 'E', 'T'};
constexpr std::uint64_t kSearchStream = 0x5EA5C4ULL;

// Little-endian encoding independent of host byte order.
class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int b = 0; b < 8; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const char* data, std::size_t n) { buf_.append(data, n); }
    std::string& str() { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, std::size_t begin, std::size_t end) : data_(data), pos_(begin), end_(end) {}

    std::uint64_t uint(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int b = 0; b < width; ++b)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(b)])) << (8 * b);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string take(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return end_ - pos_; }

private:
    void need(std::size_t n) const {
        if (end_ - pos_ < n) throw FormatError("dataset file is truncated");
    }
    const std::string& data_;
    std::size_t pos_;
    std::size_t end_;
};

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

nlohmann::json expert_to_json(const ExpertOptions& e) {
    return {{"trials", e.search.trials},
            {"search_steps", e.search.steps},
            {"search_h", e.search.grid_h},
            {"tolerance", e.search.tolerance},
            {"gain", e.control.gain},
            {"cost", to_string(e.control.cost)},
            {"reassign_each_step", e.control.reassign_each_step}};
}

}  // namespace

nlohmann::json env_spec_to_json(const EnvSpec& s) {
    nlohmann::json doc = {{"width", s.rect.width},   {"length", s.rect.length},   {"peaks", s.peaks},
                          {"robots", s.robots},      {"radius", s.radius},        {"horizon", s.horizon},
                          {"u_max", s.u_max},        {"lloyd_gain", s.lloyd_gain}, {"grid_h", s.grid_h},
                          {"weighting", to_string(s.weighting)}};
    doc["normalization"] = s.normalization ? nlohmann::json(*s.normalization) : nlohmann::json(nullptr);
    return doc;
}

EnvSpec env_spec_from_json(const nlohmann::json& doc) {
    EnvSpec s;
    s.rect.width = doc.value("width", s.rect.width);
    s.rect.length = doc.value("length", s.rect.length);
    s.peaks = doc.value("peaks", s.peaks);
    s.robots = doc.value("robots", s.robots);
    s.radius = doc.value("radius", s.radius);
    s.horizon = doc.value("horizon", s.horizon);
    s.u_max = doc.value("u_max", s.u_max);
    s.lloyd_gain = doc.value("lloyd_gain", s.lloyd_gain);
    s.grid_h = doc.value("grid_h", s.grid_h);
    if (doc.contains("weighting")) s.weighting = edge_weighting_from_string(doc.at("weighting").get<std::string>());
    if (doc.contains("normalization") && !doc.at("normalization").is_null())
        s.normalization = doc.at("normalization").get<double>();
    return s;
}

Eigen::MatrixXd Sample::shift_operator() const {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges) {
        S(e.i, e.j) = e.weight;
        S(e.j, e.i) = e.weight;
    }
    return S;
}

bool operator==(const Sample& a, const Sample& b) {
    return a.n == b.n && a.edges == b.edges && a.X.rows() == b.X.rows() && a.X.cols() == b.X.cols() &&
           a.U.rows() == b.U.rows() && a.U.cols() == b.U.cols() && a.X == b.X && a.U == b.U;
}

Sample make_sample(const CommGraph& graph, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) {
    Sample s;
    s.n = graph.n;
    for (const Edge& e : graph.edges) s.edges.push_back({e.i, e.j, graph.S(e.i, e.j)});
    s.X = X;
    s.U = U;
    return s;
}

EpisodeSeeds episode_seeds(std::uint64_t base, std::uint64_t index) {
    EpisodeSeeds s;
    s.field = derive_seed(base, 2 * index);
    s.init = derive_seed(base, 2 * index + 1);
    s.search = derive_seed(s.field, kSearchStream);
    return s;
}

TargetConfig expert_targets(const DensityField& field, std::uint64_t field_seed, int robots,
                            const ExpertOptions& expert) {
    std::optional<TargetCache> cache;
    if (expert.cache_dir) {
        cache.emplace(*expert.cache_dir);
        if (auto hit = cache->find(field_seed, robots, expert.search)) return *hit;
    }
    Rng rng(derive_seed(field_seed, kSearchStream));
    TargetConfig best = find_best_config(field, robots, expert.search, rng);
    if (cache) cache->store(field_seed, robots, expert.search, best);
    return best;
}

Dataset generate_dataset(const DatasetOptions& options) {
    options.env.validate();
    options.expert.search.validate();
    if (options.episodes < 1) throw InputError("dataset needs at least one episode");

    const auto episodes = static_cast<std::size_t>(options.episodes);
    std::vector<std::vector<Sample>> per_episode(episodes);
    parallel_for(episodes, options.jobs, [&](std::size_t e) {
        const EpisodeSeeds seeds = episode_seeds(options.seed, e);
        try {
            Environment env(options.env, sample_field(options.env.rect, options.env.peaks, seeds.field));
            Rng init_rng(seeds.init);
            std::vector<Vec2> positions = clustered_init(env, init_rng);
            const TargetConfig targets = expert_targets(env.field, seeds.field, env.robots(), options.expert);
            const Controller expert = expert_controller(env, targets, options.expert.control);

            auto& out = per_episode[e];
            out.reserve(static_cast<std::size_t>(env.spec.horizon));
            for (int t = 0; t < env.spec.horizon; ++t) {
                const StepState state = observe(env, positions);
                const std::vector<Vec2> u = expert({t, positions, state.cells, &state.graph});
                Eigen::MatrixXd U(static_cast<Eigen::Index>(u.size()), 2);
                for (std::size_t i = 0; i < u.size(); ++i) {
                    U(static_cast<Eigen::Index>(i), 0) = u[i].x;
                    U(static_cast<Eigen::Index>(i), 1) = u[i].y;
                }
                out.push_back(make_sample(state.graph, node_features(state.cells, positions), U));
                positions = step(env, positions, u);
            }
        } catch (const Error& err) {
            throw GenerationError("episode " + std::to_string(e) + " (field seed " + std::to_string(seeds.field) +
                                  "): " + err.what());
        }
    });

    Dataset ds;
    for (auto& samples : per_episode)
        for (auto& s : samples) ds.samples.push_back(std::move(s));
    ds.header = {{"format", "coverlab-dataset"},
                 {"format_version", Dataset::kFormatVersion},
                 {"env", env_spec_to_json(options.env)},
                 {"episodes", options.episodes},
                 {"seed", options.seed},
                 {"samples", ds.samples.size()},
                 {"expert", expert_to_json(options.expert)}};
    return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    nlohmann::json header = dataset.header;
    header["format"] = "coverlab-dataset";
    header["format_version"] = Dataset::kFormatVersion;
    header["samples"] = dataset.samples.size();
    const std::string header_text = header.dump();

    ByteWriter w;
    w.bytes(kDatasetMagic, sizeof kDatasetMagic);
    w.u32(static_cast<std::uint32_t>(Dataset::kFormatVersion));
    w.u64(header_text.size());
    w.bytes(header_text.data(), header_text.size());
    w.u64(dataset.samples.size());
    for (const Sample& s : dataset.samples) {
        if (s.X.rows() != s.n || s.X.cols() != 3 || s.U.rows() != s.n || s.U.cols() != 2)
            throw InputError("dataset sample has inconsistent shapes");
        ByteWriter rec;
        rec.u32(static_cast<std::uint32_t>(s.n));
        rec.u32(static_cast<std::uint32_t>(s.edges.size()));
        for (const auto& e : s.edges) {
            rec.u32(static_cast<std::uint32_t>(e.i));
            rec.u32(static_cast<std::uint32_t>(e.j));
            rec.f64(e.weight);
        }
        for (int i = 0; i < s.n; ++i)
            for (int c = 0; c < 3; ++c) rec.f64(s.X(i, c));
        for (int i = 0; i < s.n; ++i)
            for (int c = 0; c < 2; ++c) rec.f64(s.U(i, c));
        w.u64(rec.str().size());
        w.bytes(rec.str().data(), rec.str().size());
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();

    ByteReader r(data, 0, data.size());
    if (r.take(sizeof kDatasetMagic) != std::string(kDatasetMagic, sizeof kDatasetMagic))
        throw FormatError(path.string() + " is not a coverlab dataset");
    const std::uint32_t version = r.u32();
    if (version != static_cast<std::uint32_t>(Dataset::kFormatVersion))
        throw VersionError("dataset format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(Dataset::kFormatVersion) + ")");
    Dataset ds;
    try {
        ds.header = nlohmann::json::parse(r.take(r.u64()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    const std::uint64_t count = r.u64();
    ds.samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, r.remaining() / 8 + 1)));
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint64_t length = r.u64();
        if (length > r.remaining()) throw FormatError("dataset record " + std::to_string(k) + " is truncated");
        const std::size_t begin = r.position();
        ByteReader rec(data, begin, begin + static_cast<std::size_t>(length));
        Sample s;
        s.n = static_cast<int>(rec.u32());
        const std::uint32_t edges = rec.u32();
        for (std::uint32_t e = 0; e < edges; ++e) {
            WeightedEdge we;
            we.i = static_cast<int>(rec.u32());
            we.j = static_cast<int>(rec.u32());
            we.weight = rec.f64();
            if (we.i >= s.n || we.j >= s.n) throw FormatError("dataset edge index out of range");
            s.edges.push_back(we);
        }
        s.X.resize(s.n, 3);
        s.U.resize(s.n, 2);
        for (int i = 0; i < s.n; ++i)
            for (int c = 0; c < 3; ++c) s.X(i, c) = rec.f64();
        for (int i = 0; i < s.n; ++i)
            for (int c = 0; c < 2; ++c) s.U(i, c) = rec.f64();
        if (rec.remaining() != 0) throw FormatError("dataset record " + std::to_string(k) + " has trailing bytes");
        r.take(static_cast<std::size_t>(length));
        ds.samples.push_back(std::move(s));
    }
    if (r.remaining() != 0) throw FormatError("dataset file has trailing bytes");
    return ds;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InputError("epochs must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be nonnegative");
    if (batch_size < 1) throw InputError("batch size must be positive");
}

double imitation_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& expert) {
    if (predicted.rows() != expert.rows() || predicted.cols() != expert.cols())
        throw DimensionError("prediction and expert action shapes differ");
    if (predicted.rows() == 0) return 0.0;
    return (predicted - expert).squaredNorm() / static_cast<double>(predicted.rows());
}

TrainResult train(const Dataset& dataset, const GnnSpec& spec, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    Rng init_rng(config.init_seed);
    return train(dataset, init_params(spec, init_rng), config, on_epoch);
}

TrainResult train(const Dataset& dataset, const GnnParams& initial, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.samples.empty()) throw InputError("cannot train on an empty dataset");
    const GnnSpec& spec = initial.spec;
    for (const Sample& s : dataset.samples)
        if (s.X.cols() != spec.input_dim || s.U.cols() != spec.output_dim || s.X.rows() != s.n || s.U.rows() != s.n)
            throw DimensionError("dataset feature dimensions do not match the GNN spec");

    std::vector<Eigen::MatrixXd> shifts;
    shifts.reserve(dataset.samples.size());
    for (const Sample& s : dataset.samples) shifts.push_back(s.shift_operator());

    TrainResult result{initial, {}};
    Optimizer optimizer(config.optimizer, spec, config.learning_rate, config.momentum);
    std::vector<std::size_t> order(dataset.samples.size());
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[shuffle.below(k)]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            const auto count = static_cast<double>(stop - start);
            GraphBatch batch;
            Eigen::Index nodes = 0;
            for (std::size_t k = start; k < stop; ++k) nodes += dataset.samples[order[k]].n;
            batch.reserve(stop - start, nodes, spec.input_dim);
            Eigen::MatrixXd expert(nodes, spec.output_dim);
            for (std::size_t k = start; k < stop; ++k) {
                const Sample& s = dataset.samples[order[k]];
                expert.middleRows(batch.nodes(), s.n) = s.U;
                batch.add(shifts[order[k]], s.X);
            }

            const ForwardCache cache = forward(result.params, std::move(batch));
            Eigen::MatrixXd grad = cache.actions - expert;
            double loss = 0.0;
            const auto& offsets = cache.batch.offsets;
            for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
                const Eigen::Index off = offsets[g];
                const Eigen::Index n = offsets[g + 1] - off;
                loss += grad.middleRows(off, n).squaredNorm() / static_cast<double>(n);
                grad.middleRows(off, n) *= 2.0 / (static_cast<double>(n) * count);
            }
            loss /= count;
            if (!std::isfinite(loss)) throw TrainingError(epoch, batches, "non-finite loss");

            optimizer.step(result.params, backward(result.params, cache, grad));
            epoch_loss += loss * count;
            ++batches;
        }
        const double mean = epoch_loss / static_cast<double>(order.size());
        result.loss_history.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

std::string to_string(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::Lloyd: return "lloyd";
        case ControllerKind::Gnn: return "gnn";
        case ControllerKind::GnnAblated: return "gnn_ablated";
        case ControllerKind::Expert: return "expert";
    }
    return "lloyd";
}

double checkpoint_normalization(const Checkpoint& checkpoint, const EnvSpec& env) {
    if (checkpoint.normalization_fixed) return checkpoint.normalization;
    return env.comm_normalization();
}

const ConditionSummary& MetricsTable::find(int condition, ControllerKind controller) const {
    for (const auto& s : summary)
        if (s.condition_index == condition && s.controller == controller) return s;
    throw InputError("no summary for controller " + to_string(controller) + " in condition " +
                     std::to_string(condition));
}

MetricsTable evaluate(const Checkpoint& checkpoint, const EvalOptions& options) {
    options.env.validate();
    if (options.trials < 1) throw InputError("evaluation needs at least one trial");

    MetricsTable table;
    table.conditions = options.conditions;
    if (table.conditions.empty()) table.conditions.push_back({options.env.robots, options.env.radius});

    std::vector<ControllerKind> kinds{ControllerKind::Lloyd};
    for (ControllerKind k : options.controllers)
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);

    const std::size_t trials = static_cast<std::size_t>(options.trials);
    const std::size_t jobs = table.conditions.size() * trials;
    std::vector<std::vector<EpisodeLog>> results(jobs);

    parallel_for(jobs, options.jobs, [&](std::size_t job) {
        const std::size_t c = job / trials;
        const std::size_t trial = job % trials;
        const EpisodeSeeds seeds = episode_seeds(options.seed, trial);
        EnvSpec spec = options.env;
        spec.robots = table.conditions[c].robots;
        spec.radius = table.conditions[c].radius;
        spec.normalization = checkpoint_normalization(checkpoint, spec);
        spec.weighting = checkpoint.weighting;
        Environment env(spec, sample_field(spec.rect, spec.peaks, seeds.field));
        Rng init_rng(seeds.init);
        const std::vector<Vec2> initial = clustered_init(env, init_rng);

        for (ControllerKind kind : kinds) {
            Controller policy;
            switch (kind) {
                case ControllerKind::Lloyd: policy = lloyd_controller(env); break;
                case ControllerKind::Gnn: policy = gnn_controller(checkpoint.params, env, false); break;
                case ControllerKind::GnnAblated: policy = gnn_controller(checkpoint.params, env, true); break;
                case ControllerKind::Expert:
                    policy = expert_controller(env, expert_targets(env.field, seeds.field, env.robots(), options.expert),
                                               options.expert.control);
                    break;
            }
            EpisodeLog log = run_episode(env, policy, initial, to_string(kind));
            log.field_seed = seeds.field;
            log.init_seed = seeds.init;
            results[job].push_back(std::move(log));
        }
    });

    for (std::size_t job = 0; job < jobs; ++job) {
        const double baseline = results[job][0].final_reward();
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            const EpisodeLog& log = results[job][k];
            TrialRecord row;
            row.condition = static_cast<int>(job / trials);
            row.trial = static_cast<int>(job % trials);
            row.controller = kinds[k];
            row.field_seed = log.field_seed;
            row.init_seed = log.init_seed;
            row.final_reward = log.final_reward();
            row.final_peak_coverage = log.final_peak_coverage();
            row.advantage = log.final_reward() - baseline;
            table.rows.push_back(row);
            if (options.keep_logs) table.logs.push_back(log);
        }
    }

    for (std::size_t c = 0; c < table.conditions.size(); ++c) {
        for (ControllerKind kind : kinds) {
            ConditionSummary s;
            s.condition_index = static_cast<int>(c);
            s.condition = table.conditions[c];
            s.controller = kind;
            std::vector<double> advantages;
            for (const auto& row : table.rows) {
                if (row.condition != static_cast<int>(c) || row.controller != kind) continue;
                s.mean_final_reward += row.final_reward;
                s.mean_peak_coverage += row.final_peak_coverage;
                s.mean_advantage += row.advantage;
                advantages.push_back(row.advantage);
            }
            const auto n = static_cast<double>(advantages.size());
            s.mean_final_reward /= n;
            s.mean_peak_coverage /= n;
            s.mean_advantage /= n;
            s.median_advantage = median(advantages);
            table.summary.push_back(s);
        }
    }
    return table;
}

}  // namespace coverlab
