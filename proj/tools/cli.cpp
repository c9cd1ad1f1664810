#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "coverlab/field.hpp"
#include "coverlab/gnn.hpp"
#include "coverlab/imitation.hpp"
#include "coverlab/log.hpp"
#include "coverlab/parallel.hpp"
#include "coverlab/sim.hpp"
#include "svg.hpp"

namespace coverlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Args {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::vector<std::string> sets;
    std::optional<std::string> dataset;
    std::vector<std::string> checkpoints;
    bool schema = false;
};

// Everything a command needs once the command line is resolved.
struct Context {
    std::string command;
    RunConfig config;
    json config_doc;
    fs::path root;
    fs::path dir;
    std::ostream* out = nullptr;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const std::string& what, const std::string& producer) {
    if (!fs::exists(path))
        throw MissingArtifact(what + " not found at " + path.string() + " (run `coverlab " + producer +
                              "` first or pass its path)");
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check(bool ok, const std::string& what) {
    if (!ok) throw InvariantViolation(what);
}

const char* color_for(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::Lloyd: return "#1f77b4";
        case ControllerKind::Gnn: return "#d62728";
        case ControllerKind::GnnAblated: return "#ff7f0e";
        case ControllerKind::Expert: return "#2ca02c";
    }
    return "black";
}

ExpertOptions resolved_expert(const Context& ctx) {
    ExpertOptions e = ctx.config.expert;
    if (!e.cache_dir) e.cache_dir = ctx.root / "targets";
    return e;
}

// Rewards are non-positive and finite; peak coverage is a fraction; every
// controller of a condition saw the same seeds.
void check_metrics(const MetricsTable& table, const EvalOptions& options) {
    const std::size_t expected = table.conditions.size() * static_cast<std::size_t>(options.trials) *
                                 (options.controllers.size() +
                                  (std::count(options.controllers.begin(), options.controllers.end(),
                                              ControllerKind::Lloyd) == 0 ? 1 : 0));
    check(table.rows.size() == expected, "metrics table has " + std::to_string(table.rows.size()) +
                                             " rows, expected " + std::to_string(expected));
    std::map<std::pair<int, int>, std::pair<std::uint64_t, std::uint64_t>> seeds;
    for (const TrialRecord& r : table.rows) {
        check(std::isfinite(r.final_reward) && r.final_reward <= 0.0,
              "final reward " + fmt(r.final_reward) + " is not a finite non-positive number");
        check(r.final_peak_coverage >= 0.0 && r.final_peak_coverage <= 1.0, "peak coverage outside [0, 1]");
        check(std::isfinite(r.advantage), "non-finite advantage");
        auto [it, fresh] = seeds.try_emplace({r.condition, r.trial}, r.field_seed, r.init_seed);
        check(fresh || it->second == std::make_pair(r.field_seed, r.init_seed),
              "controllers of trial " + std::to_string(r.trial) + " ran on different seeds");
    }
}

std::vector<ControllerKind> controllers_in(const MetricsTable& table) {
    std::vector<ControllerKind> kinds;
    for (const auto& r : table.rows)
        if (std::find(kinds.begin(), kinds.end(), r.controller) == kinds.end()) kinds.push_back(r.controller);
    return kinds;
}

Checkpoint read_checkpoint(const fs::path& path) {
    require_file(path, "checkpoint", "train");
    return load_checkpoint(path);
}

fs::path default_checkpoint(const Context& ctx) { return ctx.root / "train" / "checkpoint.json"; }

std::vector<fs::path> checkpoint_paths(const Context& ctx, const Args& args) {
    if (args.checkpoints.empty()) return {default_checkpoint(ctx)};
    return {args.checkpoints.begin(), args.checkpoints.end()};
}

std::string metrics_csv(const MetricsTable& table, const std::string& prefix_header = {},
                        const std::string& prefix = {}) {
    std::ostringstream csv;
    csv << prefix_header
        << "condition,robots,radius,trial,controller,field_seed,init_seed,final_reward,final_peak_coverage,advantage\n";
    for (const TrialRecord& r : table.rows) {
        const Condition& c = table.conditions[static_cast<std::size_t>(r.condition)];
        csv << prefix << r.condition << ',' << c.robots << ',' << fmt(c.radius) << ',' << r.trial << ','
            << to_string(r.controller) << ',' << r.field_seed << ',' << r.init_seed << ',' << fmt(r.final_reward)
            << ',' << fmt(r.final_peak_coverage) << ',' << fmt(r.advantage) << '\n';
    }
    return csv.str();
}

json summary_json(const MetricsTable& table) {
    json rows = json::array();
    for (const ConditionSummary& s : table.summary)
        rows.push_back({{"condition", s.condition_index},
                        {"robots", s.condition.robots},
                        {"radius", s.condition.radius},
                        {"controller", to_string(s.controller)},
                        {"mean_final_reward", s.mean_final_reward},
                        {"mean_advantage", s.mean_advantage},
                        {"median_advantage", s.median_advantage},
                        {"mean_peak_coverage", s.mean_peak_coverage}});
    return rows;
}

// ---- commands ---------------------------------------------------------------

void cmd_gen_field(Context& ctx) {
    const EnvSpec& env = ctx.config.env;
    const DensityField field = sample_field(env.rect, env.peaks, ctx.config.field_seed);
    const fs::path path = ctx.dir / "field.json";
    save_field(path, field, ctx.config.field_seed);

    const FieldFile back = load_field(path);
    check(static_cast<int>(back.field.peaks().size()) == env.peaks, "field file does not hold the requested peaks");
    for (const auto& p : back.field.peaks()) check(env.rect.contains(p.center), "peak center outside the domain");
    *ctx.out << "wrote " << path.string() << " (" << env.peaks << " peaks on " << env.rect.width << "x"
             << env.rect.length << ")\n";
}

void cmd_gen_dataset(Context& ctx) {
    DatasetOptions options = dataset_options(ctx.config);
    options.expert = resolved_expert(ctx);
    const Dataset ds = generate_dataset(options);

    const double tol = options.env.u_max * (1 + 1e-12);
    for (const Sample& s : ds.samples) {
        check(s.X.allFinite() && s.U.allFinite(), "non-finite sample");
        for (Eigen::Index i = 0; i < s.U.rows(); ++i) check(s.U.row(i).norm() <= tol, "expert action exceeds u_max");
    }
    check(ds.samples.size() == static_cast<std::size_t>(options.episodes) * static_cast<std::size_t>(options.env.horizon),
          "dataset sample count does not equal episodes x horizon");

    const fs::path path = ctx.dir / "dataset.bin";
    save_dataset(path, ds);
    json info = ds.header;
    info["file"] = "dataset.bin";
    write_file(ctx.dir / "dataset.json", info.dump(2) + "\n");
    *ctx.out << "wrote " << path.string() << " (" << ds.samples.size() << " samples from " << options.episodes
             << " episodes)\n";
}

void cmd_train(Context& ctx, const Args& args) {
    const fs::path data_path = args.dataset ? fs::path(*args.dataset) : ctx.root / "gen-dataset" / "dataset.bin";
    require_file(data_path, "dataset", "gen-dataset");
    const Dataset ds = load_dataset(data_path);
    if (ds.samples.empty()) throw FormatError("dataset " + data_path.string() + " holds no samples");

    // The checkpoint describes the environment the data came from.
    EnvSpec env = ctx.config.env;
    if (ds.header.contains("env")) env = env_spec_from_json(ds.header.at("env"));

    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult result = train(ds, ctx.config.gnn, ctx.config.train, [&](int epoch, double loss) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        logger().info("epoch {} loss {:.6g} ({:.1f}s)", epoch, loss, secs);
    });

    for (double l : result.loss_history) check(std::isfinite(l) && l >= 0.0, "loss history holds " + fmt(l));
    check(static_cast<int>(result.loss_history.size()) == ctx.config.train.epochs, "loss history length mismatch");

    Checkpoint ck;
    ck.params = result.params;
    ck.normalization = env.comm_normalization();
    ck.normalization_fixed = ctx.config.fix_normalization;
    ck.weighting = env.weighting;
    ck.train_robots = env.robots;
    ck.train_radius = env.radius;
    const fs::path ck_path = ctx.dir / "checkpoint.json";
    save_checkpoint(ck_path, ck);

    std::ostringstream csv;
    csv << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) csv << e + 1 << ',' << fmt(result.loss_history[e]) << '\n';
    write_file(ctx.dir / "loss.csv", csv.str());

    svg::Series s{"train loss", "#d62728", {}, {}, {}, {}};
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        s.x.push_back(static_cast<double>(e + 1));
        s.y.push_back(std::log10(std::max(result.loss_history[e], 1e-300)));
    }
    write_file(ctx.dir / "loss.svg", svg::line_plot({"Imitation loss", "epoch", "log10 MSE"}, {s}));

    *ctx.out << "wrote " << ck_path.string() << " (final loss " << result.loss_history.back() << ")\n";
}

void cmd_eval(Context& ctx, const Args& args) {
    const std::vector<fs::path> paths = checkpoint_paths(ctx, args);
    std::vector<Checkpoint> checkpoints;
    for (const auto& p : paths) checkpoints.push_back(read_checkpoint(p));

    EvalOptions options = eval_options(ctx.config);
    options.expert = resolved_expert(ctx);
    if (checkpoints.size() > 1) {
        // Transfer sweeps compare learned policies; the expert is the same for every row.
        options.controllers.erase(
            std::remove(options.controllers.begin(), options.controllers.end(), ControllerKind::Expert),
            options.controllers.end());
    }

    std::string metrics;
    json summary = json::array();
    std::vector<std::vector<double>> matrix;
    std::vector<Condition> conditions;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const MetricsTable table = evaluate(checkpoints[k], options);
        check_metrics(table, options);
        conditions = table.conditions;
        const std::string line = metrics_csv(table, "checkpoint,", std::to_string(k) + ",");
        metrics += k == 0 ? line : line.substr(line.find('\n') + 1);
        for (json row : summary_json(table)) {
            row["checkpoint"] = k;
            row["checkpoint_path"] = paths[k].string();
            row["train_robots"] = checkpoints[k].train_robots;
            row["train_radius"] = checkpoints[k].train_radius;
            summary.push_back(row);
        }
        std::vector<double> cells;
        for (std::size_t c = 0; c < table.conditions.size(); ++c)
            cells.push_back(table.find(static_cast<int>(c), ControllerKind::Gnn).mean_final_reward);
        matrix.push_back(cells);
    }
    write_file(ctx.dir / "metrics.csv", metrics);

    std::ostringstream scsv;
    scsv << "checkpoint,train_robots,train_radius,condition,robots,radius,controller,mean_final_reward,"
            "mean_advantage,median_advantage,mean_peak_coverage\n";
    for (const auto& r : summary)
        scsv << r["checkpoint"].get<int>() << ',' << r["train_robots"].get<int>() << ','
             << fmt(r["train_radius"].get<double>()) << ',' << r["condition"].get<int>() << ','
             << r["robots"].get<int>() << ',' << fmt(r["radius"].get<double>()) << ','
             << r["controller"].get<std::string>() << ',' << fmt(r["mean_final_reward"].get<double>()) << ','
             << fmt(r["mean_advantage"].get<double>()) << ',' << fmt(r["median_advantage"].get<double>()) << ','
             << fmt(r["mean_peak_coverage"].get<double>()) << '\n';
    write_file(ctx.dir / "summary.csv", scsv.str());
    write_file(ctx.dir / "summary.json", json{{"trials", options.trials}, {"rows", summary}}.dump(2) + "\n");

    // Rows: checkpoints (trained at some N, r); columns: evaluation conditions.
    std::ostringstream tcsv;
    std::vector<std::string> row_labels, col_labels;
    tcsv << "train_robots,train_radius";
    for (const Condition& c : conditions) {
        tcsv << ",N" << c.robots << "_r" << fmt(c.radius);
        col_labels.push_back("N" + std::to_string(c.robots) + " r" + fmt(c.radius));
    }
    tcsv << '\n';
    for (std::size_t k = 0; k < matrix.size(); ++k) {
        tcsv << checkpoints[k].train_robots << ',' << fmt(checkpoints[k].train_radius);
        for (double v : matrix[k]) tcsv << ',' << fmt(v);
        tcsv << '\n';
        row_labels.push_back("N" + std::to_string(checkpoints[k].train_robots) + " r" + fmt(checkpoints[k].train_radius));
    }
    write_file(ctx.dir / "transfer_matrix.csv", tcsv.str());
    write_file(ctx.dir / "transfer_matrix.svg",
               svg::heatmap({"GNN mean final reward", "evaluated at", "trained at"}, matrix, row_labels, col_labels));

    *ctx.out << "evaluated " << checkpoints.size() << " checkpoint(s) on " << conditions.size() << " condition(s), "
             << options.trials << " trials each\n";
}

struct Curves {
    std::vector<double> mean, lo, hi;
};

// Mean and 10-90% band across trials of a per-step series.
Curves band(const std::vector<const std::vector<double>*>& runs) {
    Curves c;
    if (runs.empty()) return c;
    const std::size_t steps = runs.front()->size();
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> v;
        for (const auto* r : runs) v.push_back((*r)[t]);
        c.mean.push_back(mean(v));
        c.lo.push_back(quantile(v, 0.1));
        c.hi.push_back(quantile(v, 0.9));
    }
    return c;
}

void cmd_compare(Context& ctx, const Args& args) {
    const Checkpoint ck = read_checkpoint(checkpoint_paths(ctx, args).front());
    EvalOptions options = eval_options(ctx.config);
    options.expert = resolved_expert(ctx);
    options.conditions = {{ctx.config.env.robots, ctx.config.env.radius}};
    options.controllers = {ControllerKind::Lloyd, ControllerKind::Gnn, ControllerKind::Expert};
    options.keep_logs = true;
    const MetricsTable table = evaluate(ck, options);
    check_metrics(table, options);
    check(table.logs.size() == table.rows.size(), "episode logs missing");

    const std::vector<ControllerKind> kinds = controllers_in(table);

    std::ostringstream csv;
    csv << "trial,controller,field_seed,init_seed,final_reward,final_peak_coverage,advantage\n";
    std::map<ControllerKind, std::vector<const TrialRecord*>> by_kind;
    for (const TrialRecord& r : table.rows) {
        by_kind[r.controller].push_back(&r);
        csv << r.trial << ',' << to_string(r.controller) << ',' << r.field_seed << ',' << r.init_seed << ','
            << fmt(r.final_reward) << ',' << fmt(r.final_peak_coverage) << ',' << fmt(r.advantage) << '\n';
    }
    json means = json::object();
    for (ControllerKind k : kinds) {
        std::vector<double> reward, cov, adv;
        for (const auto* r : by_kind[k]) {
            reward.push_back(r->final_reward);
            cov.push_back(r->final_peak_coverage);
            adv.push_back(r->advantage);
        }
        csv << "mean," << to_string(k) << ",,," << fmt(mean(reward)) << ',' << fmt(mean(cov)) << ','
            << fmt(mean(adv)) << '\n';
        means[to_string(k)] = {{"mean_final_reward", mean(reward)},
                               {"mean_final_peak_coverage", mean(cov)},
                               {"mean_advantage", mean(adv)},
                               {"median_advantage", quantile(adv, 0.5)},
                               {"trials", reward.size()}};
    }
    write_file(ctx.dir / "compare.csv", csv.str());

    // Per-step curves and the per-trial advantage series.
    std::map<ControllerKind, std::vector<const EpisodeLog*>> logs;
    for (std::size_t i = 0; i < table.rows.size(); ++i) logs[table.rows[i].controller].push_back(&table.logs[i]);
    std::map<ControllerKind, Curves> reward_curves, cov_curves;
    for (ControllerKind k : kinds) {
        std::vector<const std::vector<double>*> rw, cv;
        for (const auto* l : logs[k]) {
            rw.push_back(&l->reward);
            cv.push_back(&l->peak_coverage);
        }
        reward_curves[k] = band(rw);
        cov_curves[k] = band(cv);
    }
    const std::size_t steps = reward_curves[ControllerKind::Lloyd].mean.size();

    std::ostringstream curves;
    curves << "t";
    for (ControllerKind k : kinds) {
        const std::string n = to_string(k);
        curves << ',' << n << "_reward_mean," << n << "_reward_q10," << n << "_reward_q90," << n << "_peak_cov_mean";
    }
    curves << '\n';
    for (std::size_t t = 0; t < steps; ++t) {
        curves << t;
        for (ControllerKind k : kinds)
            curves << ',' << fmt(reward_curves[k].mean[t]) << ',' << fmt(reward_curves[k].lo[t]) << ','
                   << fmt(reward_curves[k].hi[t]) << ',' << fmt(cov_curves[k].mean[t]);
        curves << '\n';
    }
    write_file(ctx.dir / "reward_curves.csv", curves.str());

    std::vector<std::vector<double>> adv_series;
    const auto& lloyd_logs = logs[ControllerKind::Lloyd];
    const auto& gnn_logs = logs[ControllerKind::Gnn];
    for (std::size_t i = 0; i < gnn_logs.size(); ++i) adv_series.push_back(reward_advantage(*gnn_logs[i], *lloyd_logs[i]));
    std::vector<const std::vector<double>*> adv_ptrs;
    for (const auto& a : adv_series) adv_ptrs.push_back(&a);
    const Curves adv_curve = band(adv_ptrs);
    std::ostringstream adv;
    adv << "t,gnn_minus_lloyd_mean,gnn_minus_lloyd_q10,gnn_minus_lloyd_median,gnn_minus_lloyd_q90\n";
    for (std::size_t t = 0; t < adv_curve.mean.size(); ++t) {
        std::vector<double> v;
        for (const auto& a : adv_series) v.push_back(a[t]);
        adv << t << ',' << fmt(adv_curve.mean[t]) << ',' << fmt(adv_curve.lo[t]) << ',' << fmt(quantile(v, 0.5)) << ','
            << fmt(adv_curve.hi[t]) << '\n';
    }
    write_file(ctx.dir / "advantage.csv", adv.str());

    std::vector<double> xs(steps);
    std::iota(xs.begin(), xs.end(), 0.0);
    std::vector<svg::Series> rs, cs;
    for (ControllerKind k : kinds) {
        rs.push_back({to_string(k), color_for(k), xs, reward_curves[k].mean, reward_curves[k].lo, reward_curves[k].hi});
        cs.push_back({to_string(k), color_for(k), xs, cov_curves[k].mean, cov_curves[k].lo, cov_curves[k].hi});
    }
    write_file(ctx.dir / "reward.svg", svg::line_plot({"Reward over time (10-90% band)", "step", "reward"}, rs));
    write_file(ctx.dir / "peak_coverage.svg",
               svg::line_plot({"Peak coverage over time (10-90% band)", "step", "fraction of peaks covered"}, cs));
    std::vector<double> finals;
    for (const auto* r : by_kind[ControllerKind::Gnn]) finals.push_back(r->advantage);
    write_file(ctx.dir / "advantage_hist.svg",
               svg::histogram({"Final reward advantage, GNN minus Lloyd", "advantage", "trials"}, finals, 15,
                              color_for(ControllerKind::Gnn)));

    json summary = {{"trials", options.trials},
                    {"robots", ctx.config.env.robots},
                    {"radius", ctx.config.env.radius},
                    {"controllers", means}};
    write_file(ctx.dir / "summary.json", summary.dump(2) + "\n");

    for (ControllerKind k : kinds)
        *ctx.out << to_string(k) << ": mean final reward " << means[to_string(k)]["mean_final_reward"].get<double>()
                 << ", peak coverage " << means[to_string(k)]["mean_final_peak_coverage"].get<double>() << "\n";
}

void cmd_ablate(Context& ctx, const Args& args) {
    const Checkpoint ck = read_checkpoint(checkpoint_paths(ctx, args).front());
    EvalOptions options = eval_options(ctx.config);
    options.expert = resolved_expert(ctx);
    options.conditions = {{ctx.config.env.robots, ctx.config.env.radius}};
    options.controllers = {ControllerKind::Lloyd, ControllerKind::Gnn, ControllerKind::GnnAblated};
    const MetricsTable table = evaluate(ck, options);
    check_metrics(table, options);

    std::map<int, const TrialRecord*> intact, ablated;
    for (const TrialRecord& r : table.rows) {
        if (r.controller == ControllerKind::Gnn) intact[r.trial] = &r;
        if (r.controller == ControllerKind::GnnAblated) ablated[r.trial] = &r;
    }
    check(intact.size() == ablated.size() && static_cast<int>(intact.size()) == options.trials,
          "ablation is missing paired trials");

    std::ostringstream csv;
    csv << "trial,field_seed,init_seed,intact_reward,ablated_reward,intact_minus_ablated,intact_peak_coverage,"
           "ablated_peak_coverage\n";
    std::vector<double> a, b, d, ca, cb;
    int intact_wins = 0;
    for (const auto& [trial, i] : intact) {
        const TrialRecord* x = ablated.at(trial);
        check(i->field_seed == x->field_seed && i->init_seed == x->init_seed, "ablation pair ran on different seeds");
        const double diff = i->final_reward - x->final_reward;
        csv << trial << ',' << i->field_seed << ',' << i->init_seed << ',' << fmt(i->final_reward) << ','
            << fmt(x->final_reward) << ',' << fmt(diff) << ',' << fmt(i->final_peak_coverage) << ','
            << fmt(x->final_peak_coverage) << '\n';
        a.push_back(i->final_reward);
        b.push_back(x->final_reward);
        d.push_back(diff);
        ca.push_back(i->final_peak_coverage);
        cb.push_back(x->final_peak_coverage);
        if (diff > 0) ++intact_wins;
    }
    csv << "mean,,," << fmt(mean(a)) << ',' << fmt(mean(b)) << ',' << fmt(mean(d)) << ',' << fmt(mean(ca)) << ','
        << fmt(mean(cb)) << '\n';
    write_file(ctx.dir / "ablate.csv", csv.str());
    json summary = {{"trials", options.trials},
                    {"mean_intact_reward", mean(a)},
                    {"mean_ablated_reward", mean(b)},
                    {"mean_intact_minus_ablated", mean(d)},
                    {"median_intact_minus_ablated", quantile(d, 0.5)},
                    {"trials_intact_better", intact_wins},
                    {"mean_intact_peak_coverage", mean(ca)},
                    {"mean_ablated_peak_coverage", mean(cb)},
                    {"mean_lloyd_reward", table.find(0, ControllerKind::Lloyd).mean_final_reward}};
    write_file(ctx.dir / "summary.json", summary.dump(2) + "\n");
    write_file(ctx.dir / "ablate_hist.svg",
               svg::histogram({"Final reward, intact minus edges removed", "difference", "trials"}, d, 15,
                              color_for(ControllerKind::GnnAblated)));
    *ctx.out << "intact " << mean(a) << ", ablated " << mean(b) << ", intact better on " << intact_wins << "/"
             << options.trials << " trials\n";
}

// ---- plumbing ---------------------------------------------------------------

json read_config_doc(const std::optional<std::string>& path) {
    if (!path) return config_to_json(RunConfig{});
    std::ifstream f(*path);
    if (!f) throw ConfigError("cannot read config file " + *path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + *path + " is not valid JSON: " + e.what());
    }
}

// Which config key --seed sets for each command.
const char* seed_key(const std::string& command) {
    if (command == "gen-field") return "field_seed";
    if (command == "gen-dataset") return "data.seed";
    if (command == "train") return "train.init_seed";
    return "eval.seed";
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const CLI::ParseError*>(&e)) return kUsage;
    if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
    if (dynamic_cast<const MissingArtifact*>(&e)) return kMissingInput;
    if (dynamic_cast<const FormatError*>(&e)) return kFormat;  // includes VersionError
    if (dynamic_cast<const IoError*>(&e)) return kWrite;
    if (dynamic_cast<const Error*>(&e)) return kRuntime;
    return kFailure;
}

fs::path output_root(const std::optional<std::string>& out_flag, const RunConfig& config) {
    if (out_flag) return *out_flag;
    if (const char* env = std::getenv("COVERLAB_OUT"); env != nullptr && *env != '\0') return env;
    return config.output_dir;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Decentralized coverage control workbench: density fields, expert demonstrations, GNN imitation "
                 "and paired evaluation against Lloyd's algorithm."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "coverlab 0.1.0");

    Args args;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config, "JSON run config (defaults apply to omitted keys)");
        sub->add_option("--seed", args.seed, "seed override for this command's stage");
        sub->add_option("--jobs", args.jobs, "worker threads; 0 uses every core")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", args.out, "output root (overrides COVERLAB_OUT and output_dir)");
        sub->add_option("--set", args.sets, "config override, e.g. --set train.epochs=10");
    };
    std::map<std::string, CLI::App*> subs;
    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        common(sub);
        subs[name] = sub;
        return sub;
    };
    add("gen-field", "sample a Gaussian-mixture density field");
    add("gen-dataset", "roll out the expert and record state-action pairs");
    add("train", "fit the GNN policy to the dataset")->add_option("--dataset", args.dataset, "dataset path");
    add("eval", "evaluate checkpoints over the (robots, radius) sweep")
        ->add_option("--checkpoint", args.checkpoints, "checkpoint path(s); several give a transfer matrix");
    add("compare", "paired GNN / Lloyd / expert trials with curves and plots")
        ->add_option("--checkpoint", args.checkpoints, "checkpoint path")
        ->expected(1);
    add("ablate", "paired intact vs edge-removed GNN trials")
        ->add_option("--checkpoint", args.checkpoints, "checkpoint path")
        ->expected(1);
    add("config", "print the resolved configuration")->add_flag("--schema", args.schema, "print the JSON schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    Context ctx;
    ctx.command = command;
    ctx.out = &out;
    const auto started = std::chrono::steady_clock::now();
    const std::string started_at = timestamp();
    int code = kOk;
    std::string failure;
    try {
        json doc = read_config_doc(args.config);
        for (const auto& s : args.sets) apply_override(doc, s);
        if (args.seed) apply_override(doc, std::string(seed_key(command)) + "=" + std::to_string(*args.seed));
        if (args.jobs) doc["jobs"] = *args.jobs;
        ctx.config = config_from_json(doc);
        ctx.config_doc = config_to_json(ctx.config);

        if (command == "config") {
            out << (args.schema ? config_schema() : ctx.config_doc).dump(2) << "\n";
            return kOk;
        }

        ctx.root = output_root(args.out, ctx.config);
        ctx.dir = ctx.root / command;
        make_dir(ctx.dir);
        write_file(ctx.dir / "config.json", ctx.config_doc.dump(2) + "\n");

        if (command == "gen-field") cmd_gen_field(ctx);
        else if (command == "gen-dataset") cmd_gen_dataset(ctx);
        else if (command == "train") cmd_train(ctx, args);
        else if (command == "eval") cmd_eval(ctx, args);
        else if (command == "compare") cmd_compare(ctx, args);
        else if (command == "ablate") cmd_ablate(ctx, args);
    } catch (const std::exception& e) {
        code = exit_code_for(e);
        failure = e.what();
        err << "coverlab " << command << ": " << e.what() << "\n";
    }

    // Timestamps and wall time live only here so every other output is reproducible.
    if (!ctx.dir.empty() && fs::is_directory(ctx.dir)) {
        std::ostringstream log;
        log << "started " << started_at << "\nfinished " << timestamp() << "\nelapsed_seconds "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() << "\ncommand";
        for (int i = 0; i < argc; ++i) log << ' ' << argv[i];
        log << "\nexit_code " << code << "\n";
        if (!failure.empty()) log << "error " << failure << "\n";
        std::ofstream(ctx.dir / "run.log", std::ios::trunc) << log.str();
    }
    return code;
}

}  // namespace coverlab::cli
