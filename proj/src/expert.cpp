#include "coverlab/expert.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "coverlab/errors.hpp"
#include "coverlab/geometry.hpp"

namespace coverlab {

namespace {

// Kuhn-Munkres with row/column potentials on the submatrix rows x cols.
// Returns the optimal cost; assigned[r] receives the position in `cols` of row r's column.
double solve_assignment(const Eigen::MatrixXd& cost, const std::vector<int>& rows, const std::vector<int>& cols,
                        std::vector<int>* assigned) {
    const std::size_t n = rows.size();
    if (n == 0) return 0.0;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    auto a = [&](std::size_t i, std::size_t j) { return cost(rows[i - 1], cols[j - 1]); };

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> local(n);
    for (std::size_t j = 1; j <= n; ++j) local[p[j] - 1] = static_cast<int>(j - 1);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += cost(rows[r], cols[static_cast<std::size_t>(local[r])]);
    if (assigned != nullptr) *assigned = std::move(local);
    return total;
}

std::vector<Vec2> uniform_positions(const Rect& rect, int robots, Rng& rng) {
    std::vector<Vec2> out(static_cast<std::size_t>(robots));
    for (auto& p : out) p = {rng.uniform(0.0, rect.width), rng.uniform(0.0, rect.length)};
    return out;
}

std::string format_h(double h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", h);
    return buf;
}

}  // namespace

std::string to_string(AssignmentCost cost) { return cost == AssignmentCost::Euclidean ? "euclidean" : "squared"; }

AssignmentCost assignment_cost_from_string(const std::string& name) {
    if (name == "euclidean") return AssignmentCost::Euclidean;
    if (name == "squared") return AssignmentCost::Squared;
    throw InputError("unknown assignment cost '" + name + "'");
}

void ExpertSearchOptions::validate() const {
    if (trials < 1) throw InputError("expert search needs at least one trial");
    if (steps < 0) throw InputError("expert search steps must be nonnegative");
    if (!(grid_h > 0.0)) throw InputError("expert search grid resolution must be positive");
    if (!(tolerance >= 0.0)) throw InputError("expert search tolerance must be nonnegative");
    limits.validate();
}

Assignment hungarian(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw InputError("assignment cost matrix must be square");
    if (!cost.allFinite()) throw InputError("assignment cost matrix has non-finite entries");
    const auto n = static_cast<int>(cost.rows());
    Assignment out;
    if (n == 0) return out;

    std::vector<int> all(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) all[static_cast<std::size_t>(k)] = k;
    const double optimum = solve_assignment(cost, all, all, nullptr);
    const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

    // Fix rows in order, each to the smallest column that still admits an optimal completion.
    std::vector<int> free_cols = all;
    double remaining = optimum;
    out.perm.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const std::vector<int> rest_rows(all.begin() + i + 1, all.end());
        bool placed = false;
        for (std::size_t c = 0; c < free_cols.size() && !placed; ++c) {
            const int j = free_cols[c];
            std::vector<int> rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(c));
            const double completion = cost(i, j) + solve_assignment(cost, rest_rows, rest_cols, nullptr);
            if (completion <= remaining + tol || c + 1 == free_cols.size()) {
                out.perm[static_cast<std::size_t>(i)] = j;
                remaining -= cost(i, j);
                free_cols = std::move(rest_cols);
                placed = true;
            }
        }
    }
    for (int i = 0; i < n; ++i) out.total_cost += cost(i, out.perm[static_cast<std::size_t>(i)]);
    return out;
}

Eigen::MatrixXd assignment_cost_matrix(std::span<const Vec2> positions, std::span<const Vec2> targets,
                                       AssignmentCost kind) {
    if (positions.size() != targets.size()) throw InputError("need one target per robot");
    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d2 = squared_distance(positions[static_cast<std::size_t>(i)], targets[static_cast<std::size_t>(j)]);
            c(i, j) = kind == AssignmentCost::Squared ? d2 : std::sqrt(d2);
        }
    return c;
}

std::vector<Vec2> expert_control(std::span<const Vec2> positions, const TargetConfig& config,
                                 const Assignment& assignment, const ControlLimits& limits, double gain) {
    if (assignment.perm.size() != positions.size() || config.targets.size() != positions.size())
        throw InputError("assignment does not match the team size");
    std::vector<Vec2> u(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Vec2 target = config.targets[static_cast<std::size_t>(assignment.perm[i])];
        u[i] = clip_norm(gain * (target - positions[i]), limits.u_max);
    }
    return u;
}

std::vector<double> search_trial_rewards(const DensityField& field, int robots, const ExpertSearchOptions& options,
                                         Rng& rng) {
    options.validate();
    if (robots < 1) throw InputError("team size must be positive");
    const std::uint64_t base = rng.next();
    const DensityGrid grid = rasterize(field, options.grid_h);
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(options.trials));
    for (int k = 0; k < options.trials; ++k) {
        Rng trial(derive_seed(base, static_cast<std::uint64_t>(k)));
        const LloydRun run = lloyd_descent(uniform_positions(field.rect(), robots, trial), grid, kInfiniteRadius,
                                           options.limits, options.lloyd_gain, options.steps, options.tolerance);
        rewards.push_back(coverage_reward(run.positions, grid, assign_ownership(run.positions, grid)));
    }
    return rewards;
}

TargetConfig find_best_config(const DensityField& field, int robots, const ExpertSearchOptions& options, Rng& rng) {
    options.validate();
    if (robots < 1) throw InputError("team size must be positive");
    const std::uint64_t base = rng.next();
    const DensityGrid grid = rasterize(field, options.grid_h);
    TargetConfig best;
    best.achieved_reward = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < options.trials; ++k) {
        Rng trial(derive_seed(base, static_cast<std::uint64_t>(k)));
        LloydRun run = lloyd_descent(uniform_positions(field.rect(), robots, trial), grid, kInfiniteRadius,
                                     options.limits, options.lloyd_gain, options.steps, options.tolerance);
        const double reward = coverage_reward(run.positions, grid, assign_ownership(run.positions, grid));
        if (reward > best.achieved_reward) {
            best.achieved_reward = reward;
            best.targets = std::move(run.positions);
        }
    }
    return best;
}

std::string target_config_to_json(const TargetConfig& config) {
    nlohmann::json doc;
    auto& targets = doc["targets"] = nlohmann::json::array();
    for (const Vec2& t : config.targets) targets.push_back({t.x, t.y});
    doc["achieved_reward"] = config.achieved_reward;
    return doc.dump() + "\n";
}

TargetConfig target_config_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        TargetConfig c;
        for (const auto& t : doc.at("targets")) c.targets.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
        c.achieved_reward = doc.at("achieved_reward").get<double>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid target config: ") + e.what());
    }
}

std::filesystem::path TargetCache::path_for(std::uint64_t field_seed, int robots,
                                            const ExpertSearchOptions& o) const {
    return directory_ / ("targets_f" + std::to_string(field_seed) + "_n" + std::to_string(robots) + "_m" +
                         std::to_string(o.trials) + "_t" + std::to_string(o.steps) + "_h" + format_h(o.grid_h) +
                         "_tol" + format_h(o.tolerance) + "_u" + format_h(o.limits.u_max) + "_g" +
                         format_h(o.lloyd_gain) + ".json");
}

std::optional<TargetConfig> TargetCache::find(std::uint64_t field_seed, int robots,
                                              const ExpertSearchOptions& options) const {
    std::ifstream in(path_for(field_seed, robots, options), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        TargetConfig c = target_config_from_json(ss.str());
        if (static_cast<int>(c.targets.size()) != robots) return std::nullopt;
        return c;
    } catch (const FormatError&) {
        return std::nullopt;
    }
}

void TargetCache::store(std::uint64_t field_seed, int robots, const ExpertSearchOptions& options,
                        const TargetConfig& config) const {
    std::filesystem::create_directories(directory_);
    const auto final_path = path_for(field_seed, robots, options);
    auto tmp = final_path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << target_config_to_json(config);
    }
    std::filesystem::rename(tmp, final_path);
}

}  // namespace coverlab
