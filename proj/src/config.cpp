#include "coverlab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "coverlab/errors.hpp"

namespace coverlab {

extern const char* const kConfigSchemaText;

namespace {

bool has_type(const nlohmann::json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    if (type == "number") return v.is_number();
    return false;
}

void check(const nlohmann::json& v, const nlohmann::json& schema, const std::string& path,
           std::vector<std::string>& errors) {
    const std::string where = path.empty() ? "(root)" : path;
    if (auto it = schema.find("type"); it != schema.end()) {
        const std::vector<std::string> types =
            it->is_array() ? it->get<std::vector<std::string>>() : std::vector<std::string>{it->get<std::string>()};
        bool ok = false;
        for (const auto& t : types) ok = ok || has_type(v, t);
        if (!ok) {
            errors.push_back(where + ": expected " + it->dump() + ", got " + v.type_name());
            return;
        }
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        bool ok = false;
        for (const auto& option : *it) ok = ok || option == v;
        if (!ok) errors.push_back(where + ": must be one of " + it->dump());
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (auto it = schema.find("minimum"); it != schema.end() && x < it->get<double>())
            errors.push_back(where + ": must be >= " + it->dump());
        if (auto it = schema.find("exclusiveMinimum"); it != schema.end() && !(x > it->get<double>()))
            errors.push_back(where + ": must be > " + it->dump());
        if (auto it = schema.find("exclusiveMaximum"); it != schema.end() && !(x < it->get<double>()))
            errors.push_back(where + ": must be < " + it->dump());
    }
    if (v.is_string()) {
        if (auto it = schema.find("minLength"); it != schema.end() && v.get<std::string>().size() < it->get<std::size_t>())
            errors.push_back(where + ": must not be empty");
    }
    if (v.is_array()) {
        if (auto it = schema.find("items"); it != schema.end())
            for (std::size_t k = 0; k < v.size(); ++k) check(v[k], *it, path + "[" + std::to_string(k) + "]", errors);
    }
    if (v.is_object()) {
        const auto props = schema.find("properties");
        const bool closed = schema.value("additionalProperties", true) == false;
        for (const auto& [key, value] : v.items()) {
            const std::string child = path.empty() ? key : path + "." + key;
            if (props != schema.end() && props->contains(key)) {
                check(value, props->at(key), child, errors);
            } else if (closed) {
                errors.push_back(child + ": unknown key");
            }
        }
        if (auto it = schema.find("required"); it != schema.end())
            for (const auto& key : *it)
                if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing key " + key.dump());
    }
}

template <class T>
void read(const nlohmann::json& section, const char* key, T& out) {
    if (auto it = section.find(key); it != section.end() && !it->is_null()) out = it->get<T>();
}

const nlohmann::json& section_of(const nlohmann::json& doc, const char* name) {
    static const nlohmann::json empty = nlohmann::json::object();
    auto it = doc.find(name);
    return it == doc.end() ? empty : *it;
}

}  // namespace

const nlohmann::json& config_schema() {
    static const nlohmann::json schema = nlohmann::json::parse(kConfigSchemaText);
    return schema;
}

std::vector<std::string> schema_violations(const nlohmann::json& doc, const nlohmann::json& schema) {
    std::vector<std::string> errors;
    check(doc, schema, "", errors);
    return errors;
}

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json doc;
    doc["field_seed"] = c.field_seed;
    doc["output_dir"] = c.output_dir;
    doc["jobs"] = c.jobs;
    doc["env"] = env_spec_to_json(c.env);
    doc["gnn"] = {{"layers", c.gnn.layers}, {"hops", c.gnn.hops}, {"latent", c.gnn.latent}, {"mlp_hidden", c.gnn.mlp_hidden}};
    doc["train"] = {{"epochs", c.train.epochs},
                    {"learning_rate", c.train.learning_rate},
                    {"batch_size", c.train.batch_size},
                    {"shuffle_seed", c.train.shuffle_seed},
                    {"init_seed", c.train.init_seed},
                    {"optimizer", to_string(c.train.optimizer)},
                    {"momentum", c.train.momentum},
                    {"fix_normalization", c.fix_normalization}};
    doc["expert"] = {{"trials", c.expert.search.trials},
                     {"search_steps", c.expert.search.steps},
                     {"search_h", c.expert.search.grid_h},
                     {"tolerance", c.expert.search.tolerance},
                     {"gain", c.expert.control.gain},
                     {"cost", to_string(c.expert.control.cost)},
                     {"reassign_each_step", c.expert.control.reassign_each_step}};
    doc["expert"]["cache_dir"] =
        c.expert.cache_dir ? nlohmann::json(c.expert.cache_dir->string()) : nlohmann::json(nullptr);
    doc["data"] = {{"episodes", c.data_episodes}, {"seed", c.data_seed}};
    doc["eval"] = {{"trials", c.eval.trials},
                   {"seed", c.eval.seed},
                   {"radii", c.eval.radii},
                   {"robots", c.eval.robots},
                   {"include_expert", c.eval.include_expert}};
    return doc;
}

RunConfig config_from_json(const nlohmann::json& doc) {
    const auto errors = schema_violations(doc, config_schema());
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    RunConfig c;
    read(doc, "field_seed", c.field_seed);
    read(doc, "output_dir", c.output_dir);
    read(doc, "jobs", c.jobs);

    const auto& env = section_of(doc, "env");
    c.env = env_spec_from_json(env);

    const auto& gnn = section_of(doc, "gnn");
    read(gnn, "layers", c.gnn.layers);
    read(gnn, "hops", c.gnn.hops);
    read(gnn, "latent", c.gnn.latent);
    read(gnn, "mlp_hidden", c.gnn.mlp_hidden);

    const auto& train = section_of(doc, "train");
    read(train, "epochs", c.train.epochs);
    read(train, "learning_rate", c.train.learning_rate);
    read(train, "batch_size", c.train.batch_size);
    read(train, "shuffle_seed", c.train.shuffle_seed);
    read(train, "init_seed", c.train.init_seed);
    if (train.contains("optimizer")) c.train.optimizer = optimizer_from_string(train.at("optimizer").get<std::string>());
    read(train, "momentum", c.train.momentum);
    read(train, "fix_normalization", c.fix_normalization);

    const auto& expert = section_of(doc, "expert");
    read(expert, "trials", c.expert.search.trials);
    read(expert, "search_steps", c.expert.search.steps);
    read(expert, "search_h", c.expert.search.grid_h);
    read(expert, "tolerance", c.expert.search.tolerance);
    read(expert, "gain", c.expert.control.gain);
    if (expert.contains("cost")) c.expert.control.cost = assignment_cost_from_string(expert.at("cost").get<std::string>());
    read(expert, "reassign_each_step", c.expert.control.reassign_each_step);
    if (expert.contains("cache_dir") && !expert.at("cache_dir").is_null())
        c.expert.cache_dir = std::filesystem::path(expert.at("cache_dir").get<std::string>());

    const auto& data = section_of(doc, "data");
    read(data, "episodes", c.data_episodes);
    read(data, "seed", c.data_seed);

    const auto& eval = section_of(doc, "eval");
    read(eval, "trials", c.eval.trials);
    read(eval, "seed", c.eval.seed);
    read(eval, "radii", c.eval.radii);
    read(eval, "robots", c.eval.robots);
    read(eval, "include_expert", c.eval.include_expert);

    c.expert.search.limits = ControlLimits{c.env.u_max};
    c.expert.search.lloyd_gain = c.env.lloyd_gain;
    try {
        c.env.validate();
        c.gnn.validate();
        c.train.validate();
        c.expert.search.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

DatasetOptions dataset_options(const RunConfig& c) {
    DatasetOptions o;
    o.env = c.env;
    o.episodes = c.data_episodes;
    o.seed = c.data_seed;
    o.expert = c.expert;
    o.jobs = c.jobs;
    return o;
}

EvalOptions eval_options(const RunConfig& c) {
    EvalOptions o;
    o.env = c.env;
    o.trials = c.eval.trials;
    o.seed = c.eval.seed;
    o.expert = c.expert;
    o.jobs = c.jobs;
    const std::vector<double> radii = c.eval.radii.empty() ? std::vector<double>{c.env.radius} : c.eval.radii;
    const std::vector<int> robots = c.eval.robots.empty() ? std::vector<int>{c.env.robots} : c.eval.robots;
    for (int n : robots)
        for (double r : radii) o.conditions.push_back({n, r});
    o.controllers = {ControllerKind::Lloyd, ControllerKind::Gnn};
    if (c.eval.include_expert) o.controllers.push_back(ControllerKind::Expert);
    return o;
}

}  // namespace coverlab
