#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coverlab/field.hpp"
#include "coverlab/lloyd.hpp"
#include "coverlab/rng.hpp"
#include "coverlab/vec2.hpp"

namespace coverlab {

struct TargetConfig {
    std::vector<Vec2> targets;
    double achieved_reward = 0.0;
};

/// perm[i] is the target index assigned to robot i.
struct Assignment {
    std::vector<int> perm;
    double total_cost = 0.0;
};

enum class AssignmentCost { Euclidean, Squared };

std::string to_string(AssignmentCost cost);
AssignmentCost assignment_cost_from_string(const std::string& name);

struct ExpertSearchOptions {
    int trials = 32;          // M
    int steps = 200;          // T_search
    double grid_h = 0.1;      // resolution of the search grid
    double tolerance = 1e-4;  // a trial stops once every Lloyd step is shorter than this
    ControlLimits limits;
    double lloyd_gain = 1.0;

    void validate() const;
};

/// Best-of-M global Lloyd search: M uniform random starts, Lloyd's with
/// infinite sensing radius, keep the final configuration with the highest
/// reward. Trial k is seeded by derive_seed(base, k) with base drawn once from
/// rng, so the trials of a smaller M are a prefix of those of a larger M.
TargetConfig find_best_config(const DensityField& field, int robots, const ExpertSearchOptions& options, Rng& rng);

/// Per-trial final rewards of the same search (diagnostics, nested-M checks).
std::vector<double> search_trial_rewards(const DensityField& field, int robots, const ExpertSearchOptions& options,
                                         Rng& rng);

/// Minimum-cost perfect matching, O(n^3). Among optimal permutations the
/// lexicographically smallest one is returned. Throws InputError on
/// non-square or non-finite input.
Assignment hungarian(const Eigen::MatrixXd& cost);

Eigen::MatrixXd assignment_cost_matrix(std::span<const Vec2> positions, std::span<const Vec2> targets,
                                       AssignmentCost cost = AssignmentCost::Euclidean);

/// u_i = clip(gain (target_{perm(i)} - p_i), u_max).
std::vector<Vec2> expert_control(std::span<const Vec2> positions, const TargetConfig& config,
                                 const Assignment& assignment, const ControlLimits& limits, double gain = 1.0);

/// On-disk cache of search results keyed by (field seed, N, M, T_search, grid h).
class TargetCache {
public:
    explicit TargetCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

    std::optional<TargetConfig> find(std::uint64_t field_seed, int robots, const ExpertSearchOptions& options) const;
    void store(std::uint64_t field_seed, int robots, const ExpertSearchOptions& options,
               const TargetConfig& config) const;

private:
    std::filesystem::path path_for(std::uint64_t field_seed, int robots, const ExpertSearchOptions& options) const;
    std::filesystem::path directory_;
};

std::string target_config_to_json(const TargetConfig& config);
TargetConfig target_config_from_json(const std::string& text);

}  // namespace coverlab
