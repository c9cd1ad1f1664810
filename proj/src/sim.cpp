#include "coverlab/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "coverlab/errors.hpp"

namespace coverlab {

namespace {

constexpr double kClusterRadius = 1.5;
constexpr double kClusterMargin = 1.0;

}  // namespace

void EnvSpec::validate() const {
    rect.validate();
    if (peaks < 1) throw InputError("peak count must be at least 1");
    if (robots < 1) throw InputError("team size must be at least 1");
    if (!(radius > 0.0)) throw InputError("sensing radius must be positive");
    if (horizon < 1) throw InputError("horizon must be at least 1");
    ControlLimits{u_max}.validate();
    if (!(grid_h > 0.0) || grid_h > std::min(rect.width, rect.length) / 4.0)
        throw InputError("grid resolution must be in (0, min(w, l) / 4]");
    if (normalization && !(*normalization > 0.0)) throw InputError("graph normalization must be positive");
}

double EnvSpec::comm_normalization() const {
    return normalization ? *normalization : default_normalization(rect, robots);
}

Environment::Environment(EnvSpec s, DensityField f) : spec(std::move(s)), field(std::move(f)), grid{} {
    spec.validate();
    if (field.rect().width != spec.rect.width || field.rect().length != spec.rect.length)
        throw InputError("density field domain does not match the environment");
    grid = rasterize(field, spec.grid_h);
}

std::vector<Vec2> clustered_init(const Environment& env, Rng& rng) {
    const Rect& rect = env.rect();
    const double x_hi = std::max(kClusterMargin, rect.width - kClusterMargin);
    const double y_hi = std::max(kClusterMargin, rect.length / 4.0);
    const Vec2 center{rng.uniform(std::min(kClusterMargin, x_hi), x_hi), rng.uniform(std::min(kClusterMargin, y_hi), y_hi)};
    std::vector<Vec2> out(static_cast<std::size_t>(env.robots()));
    for (auto& p : out) {
        const double radius = kClusterRadius * std::sqrt(rng.uniform());
        const double angle = 2.0 * M_PI * rng.uniform();
        p = rect.clamp(center + Vec2{radius * std::cos(angle), radius * std::sin(angle)});
    }
    return out;
}

std::vector<Vec2> step(const Environment& env, std::span<const Vec2> positions, std::span<const Vec2> controls) {
    if (positions.size() != controls.size()) throw InputError("one control per robot required");
    std::vector<Vec2> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) out[i] = env.rect().clamp(positions[i] + controls[i]);
    return out;
}

double peak_coverage(std::span<const Vec2> positions, const DensityField& field, double r) {
    const auto peaks = field.peaks();
    std::size_t covered = 0;
    for (const auto& peak : peaks) {
        for (const Vec2& p : positions) {
            if (distance(p, peak.center) <= r) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(peaks.size());
}

std::vector<double> reward_advantage(const EpisodeLog& a, const EpisodeLog& b) {
    if (a.reward.size() != b.reward.size()) throw InputError("episode logs have different lengths");
    std::vector<double> out(a.reward.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = a.reward[t] - b.reward[t];
    return out;
}

StepState observe(const Environment& env, std::span<const Vec2> positions) {
    StepState s;
    s.ownership = assign_ownership(positions, env.grid);
    s.cells = mass_and_centroids(positions, env.grid, s.ownership, env.spec.radius);
    const std::vector<Edge> edges = delaunay_neighbors(s.ownership);
    s.graph = build_graph(positions, edges, env.spec.comm_normalization(), env.spec.weighting);
    s.reward = coverage_reward(positions, env.grid, s.ownership);
    s.peak_coverage = peak_coverage(positions, env.field, env.spec.radius);
    return s;
}

EpisodeLog run_episode(const Environment& env, const Controller& policy, std::span<const Vec2> initial,
                       std::string controller_id) {
    if (static_cast<int>(initial.size()) != env.robots()) throw InputError("initial positions do not match team size");
    EpisodeLog log;
    log.controller = std::move(controller_id);
    std::vector<Vec2> positions(initial.begin(), initial.end());
    const int T = env.spec.horizon;
    log.positions.reserve(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        const StepState state = observe(env, positions);
        log.positions.push_back(positions);
        log.reward.push_back(state.reward);
        log.peak_coverage.push_back(state.peak_coverage);
        if (t == T) break;

        const StepContext ctx{t, positions, state.cells, &state.graph};
        const std::vector<Vec2> u = policy(ctx);
        if (u.size() != positions.size()) throw EpisodeError(t, "controller returned the wrong number of actions");
        for (const Vec2& ui : u)
            if (!is_finite(ui)) throw EpisodeError(t, "controller returned a non-finite action");
        positions = step(env, positions, u);
    }
    return log;
}

EpisodeLog run_episode(const Environment& env, const Controller& policy, Rng& rng, std::string controller_id) {
    const std::vector<Vec2> initial = clustered_init(env, rng);
    return run_episode(env, policy, initial, std::move(controller_id));
}

Controller zero_controller() {
    return [](const StepContext& ctx) { return std::vector<Vec2>(ctx.positions.size()); };
}

Controller lloyd_controller(const Environment& env) {
    const ControlLimits limits = env.limits();
    const double gain = env.spec.lloyd_gain;
    return [limits, gain](const StepContext& ctx) {
        std::vector<Vec2> u(ctx.positions.size());
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = lloyd_control(ctx.cells[i], ctx.positions[i], limits, gain);
        return u;
    };
}

Controller gnn_controller(const GnnParams& params, const Environment& env, bool ablate) {
    auto shared = std::make_shared<const GnnParams>(params);
    const double u_max = env.spec.u_max;
    return [shared, u_max, ablate](const StepContext& ctx) {
        const Eigen::MatrixXd X = node_features(ctx.cells, ctx.positions);
        const auto n = static_cast<Eigen::Index>(ctx.positions.size());
        const Eigen::MatrixXd S = ablate || ctx.graph == nullptr ? Eigen::MatrixXd::Zero(n, n) : ctx.graph->S;
        const Eigen::MatrixXd U = forward(*shared, S, X);
        std::vector<Vec2> u(ctx.positions.size());
        for (Eigen::Index i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = clip_norm({U(i, 0), U(i, 1)}, u_max);
        return u;
    };
}

Controller expert_controller(const Environment& env, TargetConfig targets, ExpertControlOptions options) {
    struct State {
        TargetConfig targets;
        std::optional<Assignment> assignment;
    };
    if (static_cast<int>(targets.targets.size()) != env.robots())
        throw InputError("target configuration does not match team size");
    auto state = std::make_shared<State>(State{std::move(targets), std::nullopt});
    const ControlLimits limits = env.limits();
    return [state, limits, options](const StepContext& ctx) {
        if (!state->assignment || options.reassign_each_step)
            state->assignment = hungarian(assignment_cost_matrix(ctx.positions, state->targets.targets, options.cost));
        return expert_control(ctx.positions, state->targets, *state->assignment, limits, options.gain);
    };
}

void write_episode_csv(const std::filesystem::path& path, const EpisodeLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "t,robot,x,y,reward,peak_cov\n";
    char buf[160];
    for (std::size_t t = 0; t < log.positions.size(); ++t) {
        for (std::size_t i = 0; i < log.positions[t].size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", t, i, log.positions[t][i].x,
                          log.positions[t][i].y, log.reward[t], log.peak_coverage[t]);
            out << buf;
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::string episode_summary_json(const EpisodeLog& log) {
    nlohmann::json doc;
    doc["controller"] = log.controller;
    doc["field_seed"] = log.field_seed;
    doc["init_seed"] = log.init_seed;
    doc["horizon"] = log.horizon();
    doc["final_reward"] = log.final_reward();
    doc["final_peak_coverage"] = log.final_peak_coverage();
    return doc.dump(2) + "\n";
}

}  // namespace coverlab
