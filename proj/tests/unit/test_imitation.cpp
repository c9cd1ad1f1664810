#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "coverlab/errors.hpp"
#include "coverlab/imitation.hpp"
#include "unit/helpers.hpp"

using namespace coverlab;
using namespace coverlab::testing;

namespace {

DatasetOptions small_dataset(int episodes, int jobs = 2) {
    DatasetOptions o;
    o.episodes = episodes;
    o.seed = 5;
    o.jobs = jobs;
    o.env.grid_h = 0.1;
    o.expert.search.trials = 2;
    o.expert.search.steps = 40;
    o.expert.search.grid_h = 0.2;
    o.expert.search.tolerance = 1e-3;
    return o;
}

GnnSpec small_spec(int hops = 2) {
    GnnSpec s;
    s.hops = hops;
    s.latent = 16;
    s.mlp_hidden = 8;
    return s;
}

const Dataset& shared_dataset() {
    static const Dataset ds = generate_dataset(small_dataset(10));
    return ds;
}

}  // namespace

TEST_CASE("dataset: sample count, action bound, header") {
    const Dataset& ds = shared_dataset();
    CHECK(ds.samples.size() == 640);
    for (const Sample& s : ds.samples) {
        CHECK(s.n == 10);
        CHECK(s.X.allFinite());
        for (Eigen::Index i = 0; i < s.n; ++i) CHECK(s.U.row(i).norm() <= 0.5 * (1 + 1e-15));
        for (const auto& e : s.edges) {
            CHECK(e.i < e.j);
            CHECK(e.weight > 0.0);
        }
    }
    CHECK(ds.header["episodes"] == 10);
    CHECK(ds.header["samples"] == 640);
    CHECK(ds.header["env"]["robots"] == 10);
    CHECK(ds.header["expert"]["trials"] == 2);
}

TEST_CASE("dataset: first sample of each episode matches a direct observation") {
    const DatasetOptions o = small_dataset(10);
    const Dataset& ds = shared_dataset();
    for (std::uint64_t e : {0u, 7u}) {
        const EpisodeSeeds seeds = episode_seeds(o.seed, e);
        const Environment env(o.env, sample_field(o.env.rect, o.env.peaks, seeds.field));
        Rng init(seeds.init);
        const auto p0 = clustered_init(env, init);
        const StepState state = observe(env, p0);
        const Sample& s = ds.samples[static_cast<std::size_t>(e) * 64];
        CHECK(s.X == node_features(state.cells, p0));
        CHECK(s.shift_operator() == state.graph.S);
    }
}

TEST_CASE("dataset: generation is deterministic and independent of the worker count") {
    const Dataset other = generate_dataset(small_dataset(10, 3));
    const Dataset& ds = shared_dataset();
    REQUIRE(other.samples.size() == ds.samples.size());
    for (std::size_t k = 0; k < ds.samples.size(); ++k) CHECK(other.samples[k] == ds.samples[k]);
    CHECK(other.header == ds.header);
}

TEST_CASE("dataset: target cache gives the same samples") {
    const auto dir = scratch_dir(COVERLAB_TEST_TMP, "dataset_cache");
    DatasetOptions o = small_dataset(3);
    o.expert.cache_dir = dir / "targets";
    const Dataset cold = generate_dataset(o);
    CHECK(std::distance(std::filesystem::directory_iterator(dir / "targets"), {}) == 3);
    const Dataset warm = generate_dataset(o);
    for (std::size_t k = 0; k < cold.samples.size(); ++k) {
        CHECK(warm.samples[k] == cold.samples[k]);
        CHECK(cold.samples[k] == shared_dataset().samples[k]);
    }
}

TEST_CASE("dataset: bit-exact save/load round trip and format errors") {
    const auto dir = scratch_dir(COVERLAB_TEST_TMP, "dataset_io");
    const Dataset& ds = shared_dataset();
    save_dataset(dir / "d.bin", ds);
    const Dataset back = load_dataset(dir / "d.bin");
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t k = 0; k < ds.samples.size(); ++k) CHECK(back.samples[k] == ds.samples[k]);
    CHECK(back.header == ds.header);

    std::ifstream in(dir / "d.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    CHECK(bytes.substr(0, 8) == "COVLDSET");

    auto write = [&](const std::string& name, const std::string& data) {
        std::ofstream out(dir / name, std::ios::binary);
        out << data;
        return dir / name;
    };
    CHECK_THROWS_AS(load_dataset(write("trunc.bin", bytes.substr(0, bytes.size() - 5))), FormatError);
    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_AS(load_dataset(write("magic.bin", wrong_magic)), FormatError);
    std::string wrong_version = bytes;
    wrong_version[8] = 9;
    CHECK_THROWS_AS(load_dataset(write("version.bin", wrong_version)), VersionError);
    CHECK_THROWS_AS(load_dataset(write("trailing.bin", bytes + "x")), FormatError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.bin"), IoError);
}

TEST_CASE("train: lr = 0 leaves params untouched and the loss flat") {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.learning_rate = 0.0;
    Dataset ds;
    ds.samples.assign(shared_dataset().samples.begin(), shared_dataset().samples.begin() + 200);
    const TrainResult r = train(ds, small_spec(), cfg);
    Rng init(cfg.init_seed);
    CHECK(r.params.flatten() == init_params(small_spec(), init).flatten());
    REQUIRE(r.loss_history.size() == 4);
    // Batch membership changes between epochs, so only the summation order differs.
    for (double l : r.loss_history) CHECK(l == doctest::Approx(r.loss_history[0]).epsilon(1e-12));
}

TEST_CASE("train: loss matches an independent per-sample computation") {
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    cfg.batch_size = 1000;
    Dataset ds;
    ds.samples.assign(shared_dataset().samples.begin(), shared_dataset().samples.begin() + 64);
    const TrainResult r = train(ds, small_spec(), cfg);
    double expected = 0.0;
    for (const Sample& s : ds.samples) {
        const Eigen::MatrixXd U = forward(r.params, s.shift_operator(), s.X);
        double sq = 0.0;
        for (Eigen::Index i = 0; i < s.n; ++i) sq += (U.row(i) - s.U.row(i)).squaredNorm();
        expected += sq / s.n;
    }
    expected /= static_cast<double>(ds.samples.size());
    CHECK(r.loss_history[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(imitation_loss(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Zero(2, 2)) == 2.0);
}

TEST_CASE("train: fixed seeds give identical loss history and params") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 32;
    const TrainResult a = train(shared_dataset(), small_spec(), cfg);
    const TrainResult b = train(shared_dataset(), small_spec(), cfg);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.params.flatten() == b.params.flatten());

    cfg.shuffle_seed += 1;
    const TrainResult c = train(shared_dataset(), small_spec(), cfg);
    CHECK(c.loss_history != a.loss_history);
}

TEST_CASE("train: memorizes a single sample") {
    Dataset one;
    one.samples.push_back(shared_dataset().samples[10]);
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 1;
    int calls = 0;
    const TrainResult r = train(one, GnnSpec{}, cfg, [&](int, double) { ++calls; });
    CHECK(calls == 2000);
    MESSAGE("first loss " << r.loss_history.front() << ", final loss " << r.loss_history.back());
    CHECK(r.loss_history.back() < 1e-3);
}

TEST_CASE("train: non-finite loss aborts with the epoch and batch index") {
    Dataset ds;
    ds.samples.assign(shared_dataset().samples.begin(), shared_dataset().samples.begin() + 4);
    ds.samples[2].X.setConstant(1e300);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 1;
    try {
        train(ds, small_spec(), cfg);
        FAIL("expected a training error");
    } catch (const TrainingError& e) {
        CHECK(e.epoch() == 1);
        CHECK(e.batch() >= 0);
        CHECK(e.batch() < 4);
    }
    CHECK_THROWS_AS(train(Dataset{}, small_spec(), cfg), InputError);
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(ds, small_spec(), cfg), InputError);
}

TEST_CASE("evaluate: Lloyd against itself and paired seeds") {
    Rng rng(1);
    Checkpoint cp;
    cp.params = init_params(small_spec(), rng);
    EvalOptions o;
    o.env.grid_h = 0.1;
    o.env.horizon = 16;
    o.trials = 4;
    o.controllers = {ControllerKind::Lloyd};
    o.jobs = 2;
    const MetricsTable t = evaluate(cp, o);
    CHECK(t.rows.size() == 4);
    for (const auto& row : t.rows) CHECK(row.advantage == 0.0);
    CHECK(t.find(0, ControllerKind::Lloyd).mean_advantage == 0.0);
    CHECK_THROWS_AS(t.find(0, ControllerKind::Gnn), InputError);

    o.controllers = {ControllerKind::Gnn, ControllerKind::GnnAblated};
    o.keep_logs = true;
    const MetricsTable u = evaluate(cp, o);
    REQUIRE(u.rows.size() == 12);
    REQUIRE(u.logs.size() == 12);
    for (std::size_t k = 0; k < 12; k += 3) {
        CHECK(u.logs[k].positions[0] == u.logs[k + 1].positions[0]);
        CHECK(u.logs[k].positions[0] == u.logs[k + 2].positions[0]);
        CHECK(u.logs[k].field_seed == u.logs[k + 1].field_seed);
        CHECK(u.rows[k].final_reward == t.rows[k / 3].final_reward);
    }
}

TEST_CASE("evaluate: a K = 0 model ignores the graph exactly") {
    Rng rng(2);
    Checkpoint cp;
    cp.params = init_params(small_spec(0), rng);
    EvalOptions o;
    o.env.grid_h = 0.1;
    o.env.horizon = 20;
    o.trials = 3;
    o.controllers = {ControllerKind::Gnn, ControllerKind::GnnAblated};
    o.keep_logs = true;
    const MetricsTable t = evaluate(cp, o);
    for (std::size_t k = 0; k < t.logs.size(); k += 3) {
        CHECK(t.logs[k + 1].positions == t.logs[k + 2].positions);
        CHECK(t.logs[k + 1].reward == t.logs[k + 2].reward);
    }
}

TEST_CASE("evaluate: condition grid and normalization policy") {
    Rng rng(3);
    Checkpoint cp;
    cp.params = init_params(small_spec(), rng);
    EvalOptions o;
    o.env.grid_h = 0.2;
    o.env.horizon = 4;
    o.trials = 2;
    for (double r : {1.0, 2.0, 3.0, 4.0}) o.conditions.push_back({10, r});
    const MetricsTable t = evaluate(cp, o);
    CHECK(t.conditions.size() == 4);
    CHECK(t.summary.size() == 8);
    CHECK(t.rows.size() == 16);
    for (int c = 0; c < 4; ++c) CHECK(t.find(c, ControllerKind::Gnn).condition.radius == c + 1.0);

    EnvSpec env;
    env.robots = 20;
    CHECK(checkpoint_normalization(cp, env) == default_normalization(env.rect, 20));
    cp.normalization = 0.3;
    cp.normalization_fixed = true;
    CHECK(checkpoint_normalization(cp, env) == 0.3);
}

TEST_CASE("env spec JSON round trip") {
    EnvSpec s;
    s.robots = 7;
    s.radius = 3.5;
    s.normalization = 0.25;
    s.weighting = EdgeWeighting::InverseDistance;
    const EnvSpec back = env_spec_from_json(env_spec_to_json(s));
    CHECK(back.robots == 7);
    CHECK(back.radius == 3.5);
    CHECK(back.normalization == 0.25);
    CHECK(back.weighting == EdgeWeighting::InverseDistance);
    CHECK_FALSE(env_spec_from_json(env_spec_to_json(EnvSpec{})).normalization.has_value());
}
