#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "chantwin/calibrate.hpp"
#include "chantwin/channel.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/fixtures.hpp"
#include "chantwin/mpc_io.hpp"
#include "chantwin/profiles.hpp"

namespace py = pybind11;
using namespace chantwin;

namespace {

Vec3 vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

EngineConfig engine(const std::string& profile, const std::string& overrides_json) {
    if (profile == "calibration") return calibration_engine_config();
    ProfileOverrides o;
    if (!overrides_json.empty()) o = parse_profile_overrides(overrides_json);
    return resolve_profile(builtin_profile(profile), o);
}

Terminal terminal(const std::array<double, 3>& pos, const std::string& antenna, double power_dbm) {
    return Terminal{vec(pos), antenna_from_spec(antenna), power_dbm, {}};
}

Scene fixture(const std::string& name) {
    if (name == "free-space") return fixtures::free_space();
    if (name == "ground") return fixtures::ground_plane();
    if (name == "room") return fixtures::room({0, 0, 0}, {10, 8, 3});
    if (name == "box") return fixtures::box({-5, -5, 0}, {5, 5, 10});
    if (name == "knife-edge") return fixtures::knife_edge(10.0);
    if (name == "campus") return fixtures::campus().scene;
    if (name == "v2v") return fixtures::v2v().scene;
    throw ValidationError("unknown fixture '" + name + "'");
}

std::string simulate(const Scene& scene, const std::array<double, 3>& tx, const std::array<double, 3>& rx, double f_hz,
                     const std::string& profile, double time_s, const std::string& overrides, int threads,
                     const std::string& tx_antenna, const std::string& rx_antenna) {
    const auto lib = material_library_from_environment();
    ChannelRealization r;
    {
        py::gil_scoped_release release;
        r = simulate_link(scene, terminal(tx, tx_antenna, 0.0), terminal(rx, rx_antenna, 0.0), f_hz,
                          engine(profile, overrides), time_s, lib, threads);
    }
    return mpc_json(r);
}

std::string run_coverage(const Scene& scene, const std::array<double, 3>& tx, const std::string& grid, double f_hz,
                         const std::string& profile, double tx_power_dbm, double time_s, const std::string& overrides,
                         int threads) {
    const auto lib = material_library_from_environment();
    CoverageOptions opt;
    opt.threads = threads;
    opt.time_s = time_s;
    const auto spec = parse_grid_spec(grid);
    py::gil_scoped_release release;
    return coverage_json(coverage(scene, terminal(tx, "isotropic", tx_power_dbm), spec, f_hz, engine(profile, overrides),
                                  lib, opt));
}

std::string calibrate(const Scene& scene, const std::array<double, 3>& tx, const std::string& measurements_csv,
                      const std::vector<std::string>& params, std::optional<std::size_t> validation_count,
                      const std::string& schedule_json, std::uint64_t seed, const std::string& profile, int threads) {
    CalibrationProblem p;
    p.scene = std::make_shared<const Scene>(scene);
    p.tx = terminal(tx, "isotropic", 0.0);
    p.library = material_library_from_environment();
    for (const auto& s : params) {
        p.parameters.push_back(parse_parameter_spec(s));
        validate_parameter(p.parameters.back(), p.library);
    }
    const auto points = parse_measurements_csv(measurements_csv);
    validate_measurements(points, scene);
    auto split = split_points(points, validation_count.value_or(points.size() / 4), seed);
    p.train = std::move(split.train);
    p.validation = std::move(split.validation);
    p.engine = engine(profile, "");
    p.threads = threads;
    SaSchedule sched = schedule_json.empty() ? SaSchedule{} : parse_sa_schedule(schedule_json);
    if (schedule_json.empty()) sched.seed = seed;
    validate_schedule(sched);
    CalibrationResult r;
    {
        py::gil_scoped_release release;
        r = simulated_annealing(p, sched);
    }
    return calibration_report_json(r, -1);
}

}  // namespace

PYBIND11_MODULE(_chantwin, m) {
    m.doc() = "Deterministic ray-tracing radio channel simulator";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_ValueError);
    py::register_exception<SceneTooLargeError>(m, "SceneTooLargeError", PyExc_ValueError);

    py::class_<Scene>(m, "Scene")
        .def_property_readonly("triangle_count", [](const Scene& s) { return s.triangles.size(); })
        .def_property_readonly("dropped_degenerate", [](const Scene& s) { return s.dropped_degenerate; })
        .def_property_readonly("dynamic_object_count", [](const Scene& s) { return s.dynamic_objects.size(); })
        .def_property_readonly("bounds",
                               [](const Scene& s) -> std::optional<std::array<double, 6>> {
                                   if (s.bounds.empty()) return std::nullopt;
                                   const auto& b = s.bounds;
                                   return std::array<double, 6>{b.lo.x, b.lo.y, b.lo.z, b.hi.x, b.hi.y, b.hi.z};
                               })
        .def("to_json", [](const Scene& s) { return scene_to_json(s); });

    m.def("parse_scene", [](const std::string& text) { return parse_scene(text, material_library_from_environment()); },
          py::arg("text"));
    m.def("fixture", &fixture, py::arg("name"));
    m.def("profile_names", &builtin_profile_names);
    m.def("simulate_json", &simulate, py::arg("scene"), py::arg("tx"), py::arg("rx"), py::arg("freq_hz"),
          py::arg("profile") = "online", py::arg("time_s") = 0.0, py::arg("overrides") = "", py::arg("threads") = 1,
          py::arg("tx_antenna") = "isotropic", py::arg("rx_antenna") = "isotropic");
    m.def("coverage_json", &run_coverage, py::arg("scene"), py::arg("tx"), py::arg("grid"), py::arg("freq_hz"),
          py::arg("profile") = "offline", py::arg("tx_power_dbm") = 0.0, py::arg("time_s") = 0.0,
          py::arg("overrides") = "", py::arg("threads") = 1);
    m.def("calibrate_json", &calibrate, py::arg("scene"), py::arg("tx"), py::arg("measurements_csv"),
          py::arg("params"), py::arg("validation_count") = py::none(), py::arg("schedule") = "", py::arg("seed") = 1,
          py::arg("profile") = "calibration", py::arg("threads") = 1);
    m.def(
        "mpc_metrics",
        [](const std::string& mpc) {
            const auto r = parse_mpc_json(mpc);
            py::dict d;
            d["path_loss_db"] = path_loss(r);
            d["ds_ns"] = rms_delay_spread(r) * 1e9;
            d["asa_deg"] = angular_spread(r, AngleSide::Arrival);
            d["asd_deg"] = angular_spread(r, AngleSide::Departure);
            d["n_paths"] = r.paths.size();
            return d;
        },
        py::arg("mpc_json"));
    m.def(
        "similarity_index",
        [](const std::string& a, const std::string& b, double delay_gate_ns, double angle_gate_deg) {
            return similarity_index(parse_mpc_json(a), parse_mpc_json(b), {delay_gate_ns * 1e-9, angle_gate_deg});
        },
        py::arg("a"), py::arg("b"), py::arg("delay_gate_ns") = 10.0, py::arg("angle_gate_deg") = 10.0);
    m.def(
        "synthesize_measurements_csv",
        [](const Scene& scene, const std::array<double, 3>& tx, std::size_t count, double freq_hz, double noise_db,
           std::uint64_t seed, double truth_concrete_eps) {
            auto truth = material_library_from_environment();
            apply_parameter(truth, ParameterSpec{"concrete", CalibratedField::EpsR, 1.0, 1e3, {}}, truth_concrete_eps);
            const auto pos = fixtures::outdoor_points(scene, count, seed);
            return measurements_csv(synthesize_measurements(scene, terminal(tx, "isotropic", 0.0), truth,
                                                            calibration_engine_config(), pos, freq_hz, noise_db, seed + 1));
        },
        py::arg("scene"), py::arg("tx"), py::arg("count") = 60, py::arg("freq_hz") = 3.5e9, py::arg("noise_db") = 0.0,
        py::arg("seed") = 7, py::arg("truth_concrete_eps") = 5.0);
}
