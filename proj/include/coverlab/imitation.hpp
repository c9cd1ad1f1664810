#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "coverlab/expert.hpp"
#include "coverlab/gnn.hpp"
#include "coverlab/sim.hpp"

namespace coverlab {

struct WeightedEdge {
    int i = 0;
    int j = 0;
    double weight = 0.0;

    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// One recorded time step: the graph and signal the policy sees, and the expert's action.
struct Sample {
    int n = 0;
    std::vector<WeightedEdge> edges;
    Eigen::MatrixXd X;  // n x 3
    Eigen::MatrixXd U;  // n x 2

    Eigen::MatrixXd shift_operator() const;
    friend bool operator==(const Sample& a, const Sample& b);
};

Sample make_sample(const CommGraph& graph, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U);

/// Unordered state-action pairs plus a JSON header describing how they were made.
struct Dataset {
    static constexpr int kFormatVersion = 1;

    nlohmann::json header = nlohmann::json::object();
    std::vector<Sample> samples;
};

/// Seeds of one episode, derived from a run seed and the episode index.
struct EpisodeSeeds {
    std::uint64_t field = 0;
    std::uint64_t init = 0;
    std::uint64_t search = 0;
};

EpisodeSeeds episode_seeds(std::uint64_t base, std::uint64_t index);

struct ExpertOptions {
    ExpertSearchOptions search;
    ExpertControlOptions control;
    std::optional<std::filesystem::path> cache_dir;
};

/// Target configuration for a field, served from the cache when possible.
TargetConfig expert_targets(const DensityField& field, std::uint64_t field_seed, int robots,
                            const ExpertOptions& expert);

struct DatasetOptions {
    EnvSpec env;
    int episodes = 512;
    std::uint64_t seed = 1;
    ExpertOptions expert;
    int jobs = 1;
};

/// Rolls out the expert for env.horizon steps per episode and records every step.
Dataset generate_dataset(const DatasetOptions& options);

/// Binary layout (all integers and doubles little-endian):
///   "COVLDSET" | u32 version | u64 header bytes | header JSON | u64 record count |
///   records: u64 payload bytes | u32 n | u32 edges | edges x (u32 i, u32 j, f64 w) |
///            n x 3 f64 X (row-major) | n x 2 f64 U (row-major)
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

struct TrainConfig {
    int epochs = 256;
    double learning_rate = 1e-4;
    int batch_size = 128;
    std::uint64_t shuffle_seed = 7;
    std::uint64_t init_seed = 11;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double momentum = 0.9;

    void validate() const;
};

struct TrainResult {
    GnnParams params;
    std::vector<double> loss_history;  // per-epoch mean of the per-sample losses
};

/// Per-node MSE: (1/n) sum_i |u_i - u_i^E|^2 of one sample, averaged over a batch.
double imitation_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& expert);

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Minibatch training. Each epoch shuffles with a generator seeded from
/// (shuffle_seed, epoch), so batches are fully determined by the config.
TrainResult train(const Dataset& dataset, const GnnSpec& spec, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult train(const Dataset& dataset, const GnnParams& initial, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

enum class ControllerKind { Lloyd, Gnn, GnnAblated, Expert };

std::string to_string(ControllerKind kind);

struct Condition {
    int robots = 10;
    double radius = 2.0;
};

struct EvalOptions {
    EnvSpec env;
    std::vector<Condition> conditions;  // empty: the env's own (robots, radius)
    int trials = 50;
    std::uint64_t seed = 1000;
    std::vector<ControllerKind> controllers{ControllerKind::Lloyd, ControllerKind::Gnn};
    ExpertOptions expert;
    int jobs = 1;
    bool keep_logs = false;
};

struct TrialRecord {
    int condition = 0;
    int trial = 0;
    ControllerKind controller = ControllerKind::Lloyd;
    std::uint64_t field_seed = 0;
    std::uint64_t init_seed = 0;
    double final_reward = 0.0;
    double final_peak_coverage = 0.0;
    double advantage = 0.0;  // final reward minus Lloyd's on the same seeds
};

struct ConditionSummary {
    int condition_index = 0;
    Condition condition;
    ControllerKind controller = ControllerKind::Lloyd;
    double mean_final_reward = 0.0;
    double mean_advantage = 0.0;
    double median_advantage = 0.0;
    double mean_peak_coverage = 0.0;
};

struct MetricsTable {
    std::vector<Condition> conditions;
    std::vector<TrialRecord> rows;  // condition, trial, controller order
    std::vector<ConditionSummary> summary;
    std::vector<EpisodeLog> logs;  // parallel to rows when keep_logs

    const ConditionSummary& find(int condition, ControllerKind controller) const;
};

/// Paired trials: every controller of every condition runs on the same field
/// and initial positions for a given trial index. Lloyd's always runs as the baseline.
MetricsTable evaluate(const Checkpoint& checkpoint, const EvalOptions& options);

/// Communication normalization the checkpoint should use in `env`.
double checkpoint_normalization(const Checkpoint& checkpoint, const EnvSpec& env);

}  // namespace coverlab

namespace coverlab {

nlohmann::json env_spec_to_json(const EnvSpec& spec);
/// Missing keys keep their defaults; unknown keys are the caller's concern.
EnvSpec env_spec_from_json(const nlohmann::json& doc);

}  // namespace coverlab
