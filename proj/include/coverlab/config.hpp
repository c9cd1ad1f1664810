#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coverlab/gnn.hpp"
#include "coverlab/imitation.hpp"

namespace coverlab {

struct EvalSettings {
    int trials = 50;
    std::uint64_t seed = 1000;
    std::vector<double> radii;  // transfer sweep; empty means env.radius only
    std::vector<int> robots;    // transfer sweep; empty means env.robots only
    bool include_expert = true;
};

/// Every knob of a run. Serialized form is described by docs/config.schema.json.
struct RunConfig {
    std::uint64_t field_seed = 42;
    std::string output_dir = "runs";
    int jobs = 0;  // 0: all hardware threads
    EnvSpec env;
    GnnSpec gnn;
    TrainConfig train;
    bool fix_normalization = false;  // store C in the checkpoint and reuse it in every environment
    ExpertOptions expert;
    int data_episodes = 512;
    std::uint64_t data_seed = 1;
    EvalSettings eval;
};

/// The JSON schema the configuration is validated against.
const nlohmann::json& config_schema();

/// Violations of `schema` by `doc`, one message per problem, each prefixed by
/// its JSON path. Supports the keywords the config schema uses.
std::vector<std::string> schema_violations(const nlohmann::json& doc, const nlohmann::json& schema);

nlohmann::json config_to_json(const RunConfig& config);
/// Validates against the schema, then fills a RunConfig; missing keys keep
/// their defaults. Throws ConfigError listing every violation.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" to a config document. The value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

DatasetOptions dataset_options(const RunConfig& config);
EvalOptions eval_options(const RunConfig& config);

}  // namespace coverlab
