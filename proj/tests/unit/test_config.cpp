#include <doctest.h>

#include <fstream>

#include "coverlab/config.hpp"
#include "coverlab/errors.hpp"
#include "unit/helpers.hpp"

using namespace coverlab;
using nlohmann::json;

namespace {

json default_file() {
    std::ifstream f(std::string(COVERLAB_SOURCE_DIR) + "/configs/default.json");
    REQUIRE(f);
    return json::parse(f);
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
    for (const auto& e : errors)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("shipped default config equals the built-in defaults") {
    const json file = default_file();
    CHECK(schema_violations(file, config_schema()).empty());
    CHECK(config_to_json(config_from_json(file)) == config_to_json(RunConfig{}));
}

TEST_CASE("config json round trip") {
    RunConfig c;
    c.field_seed = 9;
    c.env.radius = 3.5;
    c.env.normalization = 0.25;
    c.env.weighting = EdgeWeighting::InverseDistance;
    c.gnn.hops = 0;
    c.train.optimizer = OptimizerKind::Adam;
    c.train.learning_rate = 1e-3;
    c.expert.search.trials = 4;
    c.expert.cache_dir = "/tmp/x";
    c.expert.control.cost = AssignmentCost::Squared;
    c.eval.radii = {1, 2, 3, 4};
    c.eval.robots = {10, 20};
    const json doc = config_to_json(c);
    CHECK(schema_violations(doc, config_schema()).empty());
    CHECK(config_to_json(config_from_json(doc)) == doc);
}

TEST_CASE("missing keys keep defaults") {
    const RunConfig c = config_from_json(json{{"env", {{"robots", 6}}}});
    CHECK(c.env.robots == 6);
    CHECK(c.env.peaks == 5);
    CHECK(c.train.epochs == 256);
    CHECK(c.expert.search.limits.u_max == c.env.u_max);
}

TEST_CASE("schema rejects bad documents") {
    const json& schema = config_schema();
    CHECK(mentions(schema_violations(json{{"bogus", 1}}, schema), "bogus: unknown key"));
    CHECK(mentions(schema_violations(json{{"env", {{"colour", 1}}}}, schema), "env.colour"));
    CHECK(mentions(schema_violations(json{{"env", {{"peaks", 0}}}}, schema), "env.peaks"));
    CHECK(mentions(schema_violations(json{{"env", {{"robots", "ten"}}}}, schema), "env.robots"));
    CHECK(mentions(schema_violations(json{{"train", {{"optimizer", "rmsprop"}}}}, schema), "train.optimizer"));
    CHECK(mentions(schema_violations(json{{"env", {{"radius", 0}}}}, schema), "env.radius"));
    CHECK(mentions(schema_violations(json{{"eval", {{"radii", {1, -2}}}}}, schema), "eval.radii"));
    CHECK(mentions(schema_violations(json::array(), schema), "(root): expected"));
    // Every problem is reported, not just the first.
    CHECK(schema_violations(json{{"bogus", 1}, {"env", {{"peaks", 0}}}}, schema).size() == 2);
}

TEST_CASE("config_from_json throws ConfigError") {
    CHECK_THROWS_AS(config_from_json(json{{"env", {{"peaks", 0}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"extra", true}}), ConfigError);
    try {
        config_from_json(json{{"extra", true}, {"gnn", {{"latent", 0}}}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("extra") != std::string::npos);
        CHECK(what.find("gnn.latent") != std::string::npos);
    }
}

TEST_CASE("load_config errors") {
    const auto dir = testing::scratch_dir(COVERLAB_TEST_TMP, "load");
    CHECK_THROWS_AS(load_config(dir / "absent.json"), IoError);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
    std::ofstream(dir / "ok.json") << R"({"field_seed": 5})";
    CHECK(load_config(dir / "ok.json").field_seed == 5);
}

TEST_CASE("apply_override") {
    json doc = config_to_json(RunConfig{});
    apply_override(doc, "train.epochs=10");
    apply_override(doc, "train.optimizer=adam");
    apply_override(doc, "eval.radii=[1,2]");
    apply_override(doc, "expert.cache_dir=null");
    const RunConfig c = config_from_json(doc);
    CHECK(c.train.epochs == 10);
    CHECK(c.train.optimizer == OptimizerKind::Adam);
    CHECK(c.eval.radii == std::vector<double>{1, 2});
    CHECK_FALSE(c.expert.cache_dir);
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "train..epochs=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "field_seed.x=1"), ConfigError);
    // An override of an unknown key is caught by validation, not silently kept.
    apply_override(doc, "train.epoch=3");
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
}

TEST_CASE("eval_options sweeps robots x radii") {
    RunConfig c;
    c.eval.radii = {1, 2, 3, 4};
    c.eval.robots = {10, 20};
    const EvalOptions o = eval_options(c);
    REQUIRE(o.conditions.size() == 8);
    CHECK(o.conditions[0].robots == 10);
    CHECK(o.conditions[0].radius == 1);
    CHECK(o.conditions[7].robots == 20);
    CHECK(o.conditions[7].radius == 4);
    CHECK(o.controllers.back() == ControllerKind::Expert);

    RunConfig d;
    d.eval.include_expert = false;
    const EvalOptions p = eval_options(d);
    REQUIRE(p.conditions.size() == 1);
    CHECK(p.conditions[0].robots == d.env.robots);
    CHECK(p.conditions[0].radius == d.env.radius);
    CHECK(p.controllers.size() == 2);
}

TEST_CASE("dataset_options copies the data section") {
    RunConfig c;
    c.data_episodes = 7;
    c.data_seed = 3;
    c.jobs = 2;
    const DatasetOptions o = dataset_options(c);
    CHECK(o.episodes == 7);
    CHECK(o.seed == 3);
    CHECK(o.jobs == 2);
}
