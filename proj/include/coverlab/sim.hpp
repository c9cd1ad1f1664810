#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coverlab/commgraph.hpp"
#include "coverlab/expert.hpp"
#include "coverlab/field.hpp"
#include "coverlab/geometry.hpp"
#include "coverlab/gnn.hpp"
#include "coverlab/lloyd.hpp"

namespace coverlab {

/// Scalar description of an environment; the density field is drawn separately.
struct EnvSpec {
    Rect rect;
    int peaks = 5;
    int robots = 10;
    double radius = 2.0;
    int horizon = 64;
    double u_max = 0.5;
    double lloyd_gain = 1.0;
    double grid_h = kDefaultGridResolution;
    std::optional<double> normalization;  // unset: default_normalization(rect, robots)
    EdgeWeighting weighting = EdgeWeighting::Distance;

    void validate() const;
    double comm_normalization() const;
};

struct Environment {
    EnvSpec spec;
    DensityField field;
    DensityGrid grid;

    Environment(EnvSpec spec, DensityField field);

    const Rect& rect() const { return spec.rect; }
    int robots() const { return spec.robots; }
    ControlLimits limits() const { return {spec.u_max}; }
};

/// Everything a controller may look at in one step.
struct StepContext {
    int t = 0;
    std::span<const Vec2> positions;
    std::span<const MassCentroid> cells;
    const CommGraph* graph = nullptr;
};

using Controller = std::function<std::vector<Vec2>(const StepContext&)>;

struct EpisodeLog {
    std::string controller;
    std::uint64_t field_seed = 0;
    std::uint64_t init_seed = 0;
    std::vector<std::vector<Vec2>> positions;  // t = 0..T
    std::vector<double> reward;                // t = 0..T
    std::vector<double> peak_coverage;         // t = 0..T

    int horizon() const { return static_cast<int>(reward.size()) - 1; }
    double final_reward() const { return reward.back(); }
    double final_peak_coverage() const { return peak_coverage.back(); }

    friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

/// Cluster center uniform in x in [1, w-1], y in [1, l/4]; robots uniform in a
/// disk of radius 1.5 around it, clamped into the domain.
std::vector<Vec2> clustered_init(const Environment& env, Rng& rng);

/// p + u, clamped component-wise into the domain.
std::vector<Vec2> step(const Environment& env, std::span<const Vec2> positions, std::span<const Vec2> controls);

/// Fraction of peaks whose center is within r of some robot.
double peak_coverage(std::span<const Vec2> positions, const DensityField& field, double r);

/// Per-step a.reward - b.reward. Throws InputError on length mismatch.
std::vector<double> reward_advantage(const EpisodeLog& a, const EpisodeLog& b);

/// Per-step state of one episode, shared by the rollout and dataset generation.
struct StepState {
    OwnershipGrid ownership;
    std::vector<MassCentroid> cells;
    CommGraph graph;
    double reward = 0.0;
    double peak_coverage = 0.0;
};

StepState observe(const Environment& env, std::span<const Vec2> positions);

EpisodeLog run_episode(const Environment& env, const Controller& policy, std::span<const Vec2> initial,
                       std::string controller_id);
EpisodeLog run_episode(const Environment& env, const Controller& policy, Rng& rng, std::string controller_id);

Controller zero_controller();
Controller lloyd_controller(const Environment& env);
/// GNN policy; outputs are norm-clipped to u_max. With ablate the graph's edges are dropped.
Controller gnn_controller(const GnnParams& params, const Environment& env, bool ablate = false);

struct ExpertControlOptions {
    double gain = 1.0;
    AssignmentCost cost = AssignmentCost::Euclidean;
    bool reassign_each_step = false;
};

/// Drives robots toward the Hungarian-assigned targets; the assignment is made
/// on the first call (or every call with reassign_each_step).
Controller expert_controller(const Environment& env, TargetConfig targets, ExpertControlOptions options = {});

/// CSV with columns t,robot,x,y,reward,peak_cov.
void write_episode_csv(const std::filesystem::path& path, const EpisodeLog& log);
std::string episode_summary_json(const EpisodeLog& log);

}  // namespace coverlab
