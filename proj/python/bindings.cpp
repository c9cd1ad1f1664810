#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coverlab/config.hpp"
#include "coverlab/errors.hpp"
#include "coverlab/expert.hpp"
#include "coverlab/field.hpp"
#include "coverlab/geometry.hpp"
#include "coverlab/gnn.hpp"
#include "coverlab/imitation.hpp"
#include "coverlab/lloyd.hpp"
#include "coverlab/sim.hpp"

namespace py = pybind11;
using namespace coverlab;

namespace {

using Positions = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec2> to_points(const Positions& a) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw DimensionError("positions must have shape (N, 2)");
    std::vector<Vec2> out(static_cast<std::size_t>(a.shape(0)));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1)};
    return out;
}

py::array_t<double> from_points(const std::vector<Vec2>& p) {
    py::array_t<double> out({static_cast<py::ssize_t>(p.size()), py::ssize_t{2}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < p.size(); ++i) {
        w(static_cast<py::ssize_t>(i), 0) = p[i].x;
        w(static_cast<py::ssize_t>(i), 1) = p[i].y;
    }
    return out;
}

// Grids come back as (ny, nx) arrays, row j holding cells at y = (j + 0.5) h.
template <class T>
py::array_t<T> grid_array(const std::vector<T>& values, int nx, int ny) {
    py::array_t<T> out({static_cast<py::ssize_t>(ny), static_cast<py::ssize_t>(nx)});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Controller make_controller(const std::string& kind, const Environment& env, const Checkpoint* ck,
                           std::uint64_t field_seed, const ExpertOptions& expert) {
    if (kind == "lloyd") return lloyd_controller(env);
    if (kind == "zero") return zero_controller();
    if (kind == "gnn" || kind == "gnn_ablated") {
        if (ck == nullptr) throw InputError("controller '" + kind + "' needs a checkpoint");
        return gnn_controller(ck->params, env, kind == "gnn_ablated");
    }
    if (kind == "expert")
        return expert_controller(env, expert_targets(env.field, field_seed, env.robots(), expert), expert.control);
    throw InputError("unknown controller '" + kind + "' (lloyd, zero, gnn, gnn_ablated, expert)");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Decentralized coverage control: geometry, GNN policy, expert and simulator";

    auto base = py::register_exception<Error>(m, "CoverlabError", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<VersionError>(m, "VersionError", format.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("stream"));
    m.def(
        "episode_seeds",
        [](std::uint64_t base, std::uint64_t index) {
            const EpisodeSeeds s = episode_seeds(base, index);
            return py::dict(py::arg("field") = s.field, py::arg("init") = s.init, py::arg("search") = s.search);
        },
        py::arg("base"), py::arg("index"));

    py::class_<DensityField>(m, "DensityField")
        .def_property_readonly("width", [](const DensityField& f) { return f.rect().width; })
        .def_property_readonly("length", [](const DensityField& f) { return f.rect().length; })
        .def_property_readonly("peaks",
                               [](const DensityField& f) {
                                   py::list out;
                                   for (const auto& p : f.peaks())
                                       out.append(py::dict(py::arg("cx") = p.center.x, py::arg("cy") = p.center.y,
                                                           py::arg("sigma") = p.sigma, py::arg("weight") = p.weight));
                                   return out;
                               })
        .def("evaluate", [](const DensityField& f, double x, double y) { return f.evaluate({x, y}); })
        .def("to_json", [](const DensityField& f, std::uint64_t seed) { return field_to_json(f, seed); },
             py::arg("seed") = 0);

    m.def(
        "sample_field",
        [](std::uint64_t seed, int peaks, double width, double length) {
            return sample_field(Rect{width, length}, peaks, seed);
        },
        py::arg("seed"), py::arg("peaks") = 5, py::arg("width") = 8.0, py::arg("length") = 40.0);
    m.def(
        "rasterize",
        [](const DensityField& f, double h) {
            const DensityGrid g = rasterize(f, h);
            return grid_array(g.values, g.nx, g.ny);
        },
        py::arg("field"), py::arg("h") = kDefaultGridResolution);

    m.def(
        "ownership",
        [](const Positions& p, const DensityField& f, double h) {
            const OwnershipGrid o = assign_ownership(to_points(p), rasterize(f, h));
            return grid_array(o.owner, o.nx, o.ny);
        },
        py::arg("positions"), py::arg("field"), py::arg("h") = kDefaultGridResolution);
    m.def(
        "mass_and_centroids",
        [](const Positions& p, const DensityField& f, double r, double h) {
            const auto pts = to_points(p);
            const DensityGrid g = rasterize(f, h);
            const auto cells = mass_and_centroids(pts, g, assign_ownership(pts, g), r);
            py::array_t<double> mass(static_cast<py::ssize_t>(cells.size()));
            std::vector<Vec2> centroids;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                mass.mutable_at(static_cast<py::ssize_t>(i)) = cells[i].mass;
                centroids.push_back(cells[i].centroid);
            }
            return py::make_tuple(mass, from_points(centroids));
        },
        py::arg("positions"), py::arg("field"), py::arg("r") = kInfiniteRadius, py::arg("h") = kDefaultGridResolution,
        "Truncated cell masses (N,) and centroids (N, 2).");
    m.def(
        "coverage_reward",
        [](const Positions& p, const DensityField& f, double h) {
            const auto pts = to_points(p);
            const DensityGrid g = rasterize(f, h);
            return coverage_reward(pts, g, assign_ownership(pts, g));
        },
        py::arg("positions"), py::arg("field"), py::arg("h") = kDefaultGridResolution);
    m.def(
        "lloyd_control",
        [](double mass, std::pair<double, double> centroid, std::pair<double, double> p, double u_max, double gain) {
            const Vec2 u = lloyd_control({mass, {centroid.first, centroid.second}}, {p.first, p.second},
                                         ControlLimits{u_max}, gain);
            return std::make_pair(u.x, u.y);
        },
        py::arg("mass"), py::arg("centroid"), py::arg("position"), py::arg("u_max") = 0.5, py::arg("gain") = 1.0);

    m.def(
        "hungarian",
        [](const Eigen::MatrixXd& cost) {
            const Assignment a = hungarian(cost);
            return py::make_tuple(a.perm, a.total_cost);
        },
        py::arg("cost"), "Minimum-cost assignment: (perm, total) with perm[i] the column of row i.");

    py::class_<GnnSpec>(m, "GnnSpec")
        .def(py::init([](int layers, int hops, int latent, int mlp_hidden) {
                 GnnSpec s;
                 s.layers = layers;
                 s.hops = hops;
                 s.latent = latent;
                 s.mlp_hidden = mlp_hidden;
                 s.validate();
                 return s;
             }),
             py::arg("layers") = 2, py::arg("hops") = 2, py::arg("latent") = 64, py::arg("mlp_hidden") = 32)
        .def_readonly("layers", &GnnSpec::layers)
        .def_readonly("hops", &GnnSpec::hops)
        .def_readonly("latent", &GnnSpec::latent)
        .def_readonly("mlp_hidden", &GnnSpec::mlp_hidden)
        .def_property_readonly("parameter_count", &GnnSpec::parameter_count)
        .def("__repr__", [](const GnnSpec& s) {
            return "GnnSpec(layers=" + std::to_string(s.layers) + ", hops=" + std::to_string(s.hops) +
                   ", latent=" + std::to_string(s.latent) + ", mlp_hidden=" + std::to_string(s.mlp_hidden) + ")";
        });

    py::class_<GnnParams>(m, "GnnParams")
        .def_readonly("spec", &GnnParams::spec)
        .def("flatten", [](const GnnParams& p) {
            const auto v = p.flatten();
            return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
        })
        .def("__len__", &GnnParams::size);
    m.def(
        "init_params", [](const GnnSpec& spec, std::uint64_t seed) {
            Rng rng(seed);
            return init_params(spec, rng);
        },
        py::arg("spec"), py::arg("seed"));
    m.def(
        "forward",
        [](const GnnParams& p, const Eigen::MatrixXd& S, const Eigen::MatrixXd& X) { return forward(p, S, X); },
        py::arg("params"), py::arg("S"), py::arg("X"), "Actions (n, 2) for shift operator S (n, n) and features X (n, 3).");

    py::class_<Checkpoint>(m, "Checkpoint")
        .def(py::init([](const GnnParams& params, double normalization, int robots, double radius) {
                 Checkpoint c;
                 c.params = params;
                 c.normalization = normalization;
                 c.train_robots = robots;
                 c.train_radius = radius;
                 return c;
             }),
             py::arg("params"), py::arg("normalization"), py::arg("train_robots") = 10, py::arg("train_radius") = 2.0)
        .def_readonly("params", &Checkpoint::params)
        .def_readonly("normalization", &Checkpoint::normalization)
        .def_readonly("normalization_fixed", &Checkpoint::normalization_fixed)
        .def_readonly("train_robots", &Checkpoint::train_robots)
        .def_readonly("train_radius", &Checkpoint::train_radius);
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("checkpoint"));

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("header", [](const Dataset& d) { return d.header.dump(); })
        .def("__len__", [](const Dataset& d) { return d.samples.size(); })
        .def(
            "sample",
            [](const Dataset& d, std::size_t i) {
                if (i >= d.samples.size()) throw py::index_error("sample index out of range");
                const Sample& s = d.samples[i];
                return py::make_tuple(s.shift_operator(), s.X, s.U);
            },
            py::arg("index"), "(S, X, U) of one recorded step.");
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::class_<EnvSpec>(m, "EnvSpec")
        .def(py::init([](const std::string& json_text) {
                 return json_text.empty() ? EnvSpec{} : env_spec_from_json(nlohmann::json::parse(json_text));
             }),
             py::arg("json") = "")
        .def_property_readonly("robots", [](const EnvSpec& e) { return e.robots; })
        .def_property_readonly("radius", [](const EnvSpec& e) { return e.radius; })
        .def_property_readonly("horizon", [](const EnvSpec& e) { return e.horizon; })
        .def_property_readonly("normalization", &EnvSpec::comm_normalization)
        .def("to_json", [](const EnvSpec& e) { return env_spec_to_json(e).dump(); });
    m.def("default_normalization",
          [](double width, double length, int robots) { return default_normalization(Rect{width, length}, robots); },
          py::arg("width"), py::arg("length"), py::arg("robots"));

    py::class_<EpisodeLog>(m, "EpisodeLog")
        .def_readonly("controller", &EpisodeLog::controller)
        .def_readonly("field_seed", &EpisodeLog::field_seed)
        .def_readonly("init_seed", &EpisodeLog::init_seed)
        .def_readonly("reward", &EpisodeLog::reward)
        .def_readonly("peak_coverage", &EpisodeLog::peak_coverage)
        .def_property_readonly("positions",
                               [](const EpisodeLog& l) {
                                   const auto steps = static_cast<py::ssize_t>(l.positions.size());
                                   const auto n = steps == 0 ? 0 : static_cast<py::ssize_t>(l.positions[0].size());
                                   py::array_t<double> out({steps, n, py::ssize_t{2}});
                                   auto w = out.mutable_unchecked<3>();
                                   for (py::ssize_t t = 0; t < steps; ++t)
                                       for (py::ssize_t i = 0; i < n; ++i) {
                                           const Vec2 p = l.positions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
                                           w(t, i, 0) = p.x;
                                           w(t, i, 1) = p.y;
                                       }
                                   return out;
                               })
        .def("summary", &episode_summary_json);
    m.def(
        "run_episode",
        [](const EnvSpec& spec, std::uint64_t field_seed, std::uint64_t init_seed, const std::string& controller,
           const Checkpoint* checkpoint) {
            EnvSpec s = spec;
            if (checkpoint != nullptr) s.normalization = checkpoint_normalization(*checkpoint, s);
            const Environment env(s, sample_field(s.rect, s.peaks, field_seed));
            ExpertOptions expert;
            expert.search.limits = env.limits();
            expert.search.lloyd_gain = s.lloyd_gain;
            const Controller policy = make_controller(controller, env, checkpoint, field_seed, expert);
            Rng rng(init_seed);
            py::gil_scoped_release release;
            EpisodeLog log = run_episode(env, policy, rng, controller);
            log.field_seed = field_seed;
            log.init_seed = init_seed;
            return log;
        },
        py::arg("env"), py::arg("field_seed"), py::arg("init_seed"), py::arg("controller") = "lloyd",
        py::arg("checkpoint") = nullptr);

    m.def(
        "evaluate",
        [](const Checkpoint& checkpoint, const std::string& config_json) {
            const RunConfig cfg = config_from_json(nlohmann::json::parse(config_json));
            MetricsTable table;
            {
                py::gil_scoped_release release;
                table = evaluate(checkpoint, eval_options(cfg));
            }
            py::list rows;
            for (const TrialRecord& r : table.rows) {
                const Condition& c = table.conditions[static_cast<std::size_t>(r.condition)];
                rows.append(py::dict(py::arg("condition") = r.condition, py::arg("robots") = c.robots,
                                     py::arg("radius") = c.radius, py::arg("trial") = r.trial,
                                     py::arg("controller") = to_string(r.controller),
                                     py::arg("field_seed") = r.field_seed, py::arg("init_seed") = r.init_seed,
                                     py::arg("final_reward") = r.final_reward,
                                     py::arg("final_peak_coverage") = r.final_peak_coverage,
                                     py::arg("advantage") = r.advantage));
            }
            return rows;
        },
        py::arg("checkpoint"), py::arg("config_json") = "{}",
        "Paired trials as a list of row dicts; the config supplies env, eval and expert settings.");

    m.def("default_config", [] { return config_to_json(RunConfig{}).dump(); });
    m.def("config_schema", [] { return config_schema().dump(); });
    m.def(
        "validate_config",
        [](const std::string& text) { return schema_violations(nlohmann::json::parse(text), config_schema()); },
        py::arg("json"), "Schema violations of a config document; empty when valid.");
}
