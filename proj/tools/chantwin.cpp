#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "chantwin/calibrate.hpp"
#include "chantwin/channel.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/fixtures.hpp"
#include "chantwin/mpc_io.hpp"
#include "chantwin/parallel.hpp"
#include "chantwin/profiles.hpp"
#include "chantwin/rng.hpp"
#include "chantwin/service.hpp"

using namespace chantwin;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kBadArgs = 2, kSceneError = 3, kNoCoverage = 4, kInfeasible = 5 };

struct ArgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Vec3 parse_vec3(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ArgError(std::string(what) + " must be \"x,y,z\"");
        }
    }
    if (v.size() != 3) throw ArgError(std::string(what) + " must be \"x,y,z\"");
    return {v[0], v[1], v[2]};
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw ArgError("cannot write " + p.string());
}

MaterialLibrary load_library(const std::string& path) {
    try {
        return path.empty() ? material_library_from_environment() : load_material_library(path);
    } catch (const std::exception& e) {
        throw InputError(std::string("material library: ") + e.what());
    }
}

Scene load_scene_file(const std::string& path, const MaterialLibrary& lib) {
    try {
        return load_scene(path, lib);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
}

AntennaPattern load_antenna(const std::string& spec) {
    try {
        return antenna_from_spec(spec);
    } catch (const std::exception& e) {
        throw InputError(std::string("antenna: ") + e.what());
    }
}

struct EngineFlags {
    std::string profile;
    std::string profile_file;
    std::optional<std::uint64_t> seed;
    int threads = 0;

    EngineConfig resolve(const std::string& fallback_calibration = "") const {
        ProfileOverrides ov;
        if (!profile_file.empty()) {
            try {
                ov = load_profile_overrides(profile_file);
            } catch (const std::exception& e) {
                throw ArgError(std::string("profile file: ") + e.what());
            }
        }
        if (seed) ov.seed = *seed;
        try {
            if (!fallback_calibration.empty() && profile == fallback_calibration) {
                auto base = builtin_profile("offline");
                base.engine = calibration_engine_config();
                return resolve_profile(base, ov);
            }
            return resolve_profile(builtin_profile(profile), ov);
        } catch (const std::exception& e) {
            throw ArgError(e.what());
        }
    }
};

void add_engine_flags(CLI::App* cmd, EngineFlags& f, const std::string& default_profile, bool with_seed = true) {
    f.profile = default_profile;
    cmd->add_option("--profile", f.profile, "Task profile (offline, online, custom)")->capture_default_str();
    cmd->add_option("--profile-file", f.profile_file, "JSON profile overrides");
    if (with_seed) cmd->add_option("--seed", f.seed, "Launch seed (0 = unrotated)");
    cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

struct Common {
    std::string scene;
    std::string materials;
};

int cmd_simulate(const Common& c, const EngineFlags& ef, const std::string& tx_s, const std::string& rx_s, double f,
                 double time_s, const std::string& out, const std::string& tx_ant, const std::string& rx_ant,
                 double tx_power) {
    const auto cfg = ef.resolve();
    const Vec3 txp = parse_vec3(tx_s, "--tx"), rxp = parse_vec3(rx_s, "--rx");
    if (!(f > 0.0)) throw ArgError("--freq must be positive");
    const auto lib = load_library(c.materials);
    const auto scene = load_scene_file(c.scene, lib);
    Terminal tx{txp, load_antenna(tx_ant), tx_power, {}};
    Terminal rx{rxp, load_antenna(rx_ant), 0.0, {}};
    const auto r = simulate_link(scene, tx, rx, f, cfg, time_s, lib, resolve_threads(ef.threads));
    if (!out.empty()) write_text(out, mpc_json(r, 2) + "\n");
    const auto pl = path_loss(r);
    std::printf("n_paths %zu\n", r.paths.size());
    if (!pl) {
        std::printf("PL no coverage\n");
        return kNoCoverage;
    }
    std::printf("PL %.2f dB\nRSRP %.2f dBm\nDS %.2f ns\n", *pl, tx_power - *pl, rms_delay_spread(r) * 1e9);
    return kOk;
}

int cmd_coverage(const Common& c, const EngineFlags& ef, const std::string& tx_s, double f, const std::string& grid_s,
                 double tx_power, double time_s, const std::string& out, const std::string& json_out) {
    const auto cfg = ef.resolve();
    const Vec3 txp = parse_vec3(tx_s, "--tx");
    if (!(f > 0.0)) throw ArgError("--freq must be positive");
    GridSpec grid;
    try {
        grid = parse_grid_spec(grid_s);
        validate_grid(grid);
    } catch (const std::exception& e) {
        throw ArgError(e.what());
    }
    const auto lib = load_library(c.materials);
    const auto scene = load_scene_file(c.scene, lib);
    CoverageOptions opt;
    opt.threads = resolve_threads(ef.threads);
    opt.time_s = time_s;
    const auto g = coverage(scene, Terminal{txp, {}, tx_power, {}}, grid, f, cfg, lib, opt);
    if (out.empty()) std::cout << coverage_csv(g);
    else write_text(out, coverage_csv(g));
    if (!json_out.empty()) write_text(json_out, coverage_json(g) + "\n");
    (out.empty() ? std::cerr : std::cout) << "cells " << g.cells.size() << "\ncovered " << std::fixed
                                          << std::setprecision(1) << 100.0 * g.covered_fraction() << "%\n";
    return kOk;
}

int cmd_calibrate(const Common& c, const EngineFlags& ef, const std::string& tx_s, const std::string& meas,
                  const std::vector<std::string>& params, std::optional<std::size_t> validation_count,
                  std::uint64_t seed, const std::string& schedule_file, const std::string& out, double penalty) {
    const auto cfg = ef.resolve("calibration");
    const Vec3 txp = parse_vec3(tx_s, "--tx");
    if (params.empty()) throw ArgError("at least one --param is required");
    std::vector<ParameterSpec> specs;
    for (const auto& p : params) {
        try {
            specs.push_back(parse_parameter_spec(p));
        } catch (const ParseError& e) {
            throw ArgError(e.what());
        }
    }
    SaSchedule schedule;
    if (!schedule_file.empty()) {
        try {
            schedule = load_sa_schedule(schedule_file);
        } catch (const std::exception& e) {
            throw ArgError(std::string("schedule file: ") + e.what());
        }
    }
    schedule.seed = seed;
    const auto lib = load_library(c.materials);
    for (const auto& s : specs) validate_parameter(s, lib);
    const auto scene = load_scene_file(c.scene, lib);
    std::vector<MeasurementPoint> points;
    try {
        points = load_measurements_csv(meas);
        validate_measurements(points, scene);
    } catch (const std::exception& e) {
        throw InputError(std::string("measurements: ") + e.what());
    }
    const std::size_t nval = validation_count ? *validation_count : std::max<std::size_t>(1, points.size() / 4);
    const auto split = split_points(points, nval, seed);

    CalibrationProblem problem;
    problem.scene = std::make_shared<const Scene>(scene);
    problem.tx = Terminal{txp, {}, 0.0, {}};
    problem.library = lib;
    problem.parameters = specs;
    problem.train = split.train;
    problem.validation = split.validation;
    problem.engine = cfg;
    problem.no_coverage_penalty_db = penalty;
    problem.threads = resolve_threads(ef.threads);
    const auto result = simulated_annealing(problem, schedule);
    if (!out.empty()) write_text(out, calibration_report_json(result) + "\n");
    std::cout << calibration_report_table(result);
    std::printf("RMSE before %.3f dB after %.3f dB (validation %.3f -> %.3f dB)\n", result.rmse_train_before,
                result.rmse_train_after, result.rmse_validation_before, result.rmse_validation_after);
    return kOk;
}

int cmd_compare(const std::string& a, const std::string& b, double delay_gate_ns, double angle_gate_deg) {
    ChannelRealization ra, rb;
    try {
        ra = load_mpc_json(a);
        rb = load_mpc_json(b);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    if (!(delay_gate_ns >= 0.0) || !(angle_gate_deg >= 0.0)) throw ArgError("gates must be non-negative");
    const double si = similarity_index(ra, rb, {delay_gate_ns * 1e-9, angle_gate_deg});
    std::printf("SI %.1f%%\n", si);
    return kOk;
}

int cmd_validate_scene(const Common& c) {
    const auto lib = load_library(c.materials);
    const auto scene = load_scene_file(c.scene, lib);
    const auto edges = extract_diffraction_edges(scene, 0.0);
    std::printf("triangles %zu\ndropped_degenerate %zu\nedges %zu\ndynamic_objects %zu\n", scene.triangles.size(),
                scene.dropped_degenerate, edges.size(), scene.dynamic_objects.size());
    if (scene.bounds.empty()) std::printf("bounds empty\n");
    else
        std::printf("bounds [%.3f, %.3f, %.3f] .. [%.3f, %.3f, %.3f]\n", scene.bounds.lo.x, scene.bounds.lo.y,
                    scene.bounds.lo.z, scene.bounds.hi.x, scene.bounds.hi.y, scene.bounds.hi.z);
    return kOk;
}

int cmd_fixture(const std::string& name, const std::string& out, int subdiv, const std::string& measurements,
                std::size_t count, double noise, std::uint64_t seed, double f) {
    Scene scene;
    if (name == "free-space") scene = fixtures::free_space();
    else if (name == "ground") scene = fixtures::ground_plane();
    else if (name == "room") scene = fixtures::room({0, 0, 0}, {10, 8, 3});
    else if (name == "box") scene = fixtures::box({-5, -5, 0}, {5, 5, 10});
    else if (name == "knife-edge") scene = fixtures::knife_edge(10.0);
    else if (name == "campus") scene = fixtures::campus(subdiv).scene;
    else if (name == "v2v") scene = fixtures::v2v().scene;
    else throw ArgError("unknown fixture '" + name + "' (free-space, ground, room, box, knife-edge, campus, v2v)");
    write_text(out, scene_to_json(scene) + "\n");
    std::printf("wrote %s (%zu triangles)\n", out.c_str(), scene.triangles.size());
    if (!measurements.empty()) {
        auto truth = default_material_library();
        apply_parameter(truth, ParameterSpec{"concrete", CalibratedField::EpsR, 1.0, 20.0, {}}, 5.0);
        const EngineConfig cfg = calibration_engine_config();
        const auto pos = fixtures::outdoor_points(scene, count, seed);
        const auto pts = synthesize_measurements(scene, Terminal{{0, -20, 10}, {}, 0.0, {}}, truth, cfg, pos, f, noise, seed + 1,
                                                 resolve_threads(0));
        write_text(measurements, measurements_csv(pts));
        std::printf("wrote %s (%zu points, concrete eps_r 5.0, tx 0,-20,10)\n", measurements.c_str(), pts.size());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chantwin: deterministic ray-tracing radio channel simulator"};
    app.require_subcommand(1);
    Common common;
    auto scene_opts = [&](CLI::App* cmd) {
        cmd->add_option("--scene", common.scene, "Scene JSON")->required();
        cmd->add_option("--materials", common.materials, "Material library JSON (default $MART_DATA_DIR/materials.json)");
    };

    EngineFlags sim_ef, cov_ef, cal_ef;
    std::string tx, rx, out, json_out, grid, tx_ant = "isotropic", rx_ant = "isotropic";
    double freq = 0.0, time_s = 0.0, tx_power = 0.0;

    auto* sim = app.add_subcommand("simulate", "Single link: MPC JSON and summary");
    scene_opts(sim);
    sim->add_option("--tx", tx, "Transmitter x,y,z")->required();
    sim->add_option("--rx", rx, "Receiver x,y,z")->required();
    sim->add_option("--freq", freq, "Carrier frequency in Hz")->required();
    sim->add_option("--time", time_s, "Scene time in seconds");
    sim->add_option("--out", out, "MPC JSON output path");
    sim->add_option("--tx-antenna", tx_ant, "isotropic, dipole or pattern file");
    sim->add_option("--rx-antenna", rx_ant, "isotropic, dipole or pattern file");
    sim->add_option("--tx-power", tx_power, "Transmit power in dBm");
    add_engine_flags(sim, sim_ef, "online");

    auto* cov = app.add_subcommand("coverage", "Coverage grid CSV");
    scene_opts(cov);
    cov->add_option("--tx", tx, "Transmitter x,y,z")->required();
    cov->add_option("--freq", freq, "Carrier frequency in Hz")->required();
    cov->add_option("--grid", grid, "xmin,ymin,xmax,ymax,step[,height]")->required();
    cov->add_option("--tx-power", tx_power, "Transmit power in dBm");
    cov->add_option("--time", time_s, "Scene time in seconds");
    cov->add_option("--out", out, "CSV output path (default stdout)");
    cov->add_option("--json", json_out, "Grid JSON output path");
    add_engine_flags(cov, cov_ef, "offline");

    std::string meas, schedule_file;
    std::vector<std::string> params;
    std::optional<std::size_t> validation_count;
    std::uint64_t cal_seed = 1;
    double penalty = 30.0;
    auto* cal = app.add_subcommand("calibrate", "Fit material parameters to measurements");
    scene_opts(cal);
    cal->add_option("--tx", tx, "Transmitter x,y,z")->required();
    cal->add_option("--measurements", meas, "Measurement CSV")->required();
    cal->add_option("--param", params, "material.field:lo..hi[@start], repeatable")->required();
    cal->add_option("--validation-count", validation_count, "Held-out points (default a quarter)");
    cal->add_option("--schedule-file", schedule_file, "SA schedule JSON");
    cal->add_option("--penalty", penalty, "Error charged to points without coverage, dB")->capture_default_str();
    cal->add_option("--out", out, "Report JSON path");
    add_engine_flags(cal, cal_ef, "calibration", false);
    cal->add_option("--seed", cal_seed, "Split and annealing seed")->capture_default_str();

    std::string a, b;
    double delay_gate = 10.0, angle_gate = 10.0;
    auto* cmp = app.add_subcommand("compare", "Similarity index of two MPC files");
    cmp->add_option("--a", a, "First MPC JSON")->required();
    cmp->add_option("--b", b, "Second MPC JSON")->required();
    cmp->add_option("--delay-gate", delay_gate, "Delay gate in ns")->capture_default_str();
    cmp->add_option("--angle-gate", angle_gate, "Angle gate in degrees")->capture_default_str();

    auto* val = app.add_subcommand("validate-scene", "Check a scene file");
    scene_opts(val);

    std::string host = "0.0.0.0", data_dir, ui_dir;
    int port = 8080, workers = 2;
    auto* srv = app.add_subcommand("serve", "HTTP job service");
    srv->add_option("--port", port, "Listen port")->capture_default_str();
    srv->add_option("--host", host, "Listen address")->capture_default_str();
    srv->add_option("--data-dir", data_dir, "Persistence directory (default $MART_DATA_DIR or ./mart-data)");
    srv->add_option("--ui-dir", ui_dir, "Static UI bundle served under /ui");
    srv->add_option("--workers", workers, "Concurrent coverage jobs")->capture_default_str();
    srv->add_option("--materials", common.materials, "Material library JSON");
    int srv_threads = 0;
    srv->add_option("--threads", srv_threads, "Threads per coverage job (0 = all cores)");

    std::string fixture_name, fixture_meas;
    int subdiv = 1;
    std::size_t count = 60;
    double noise = 0.0;
    std::uint64_t fixture_seed = 7;
    double fixture_freq = 3.5e9;
    auto* fix = app.add_subcommand("fixture", "Write a reference scene (and synthetic measurements)");
    fix->add_option("name", fixture_name, "free-space, ground, room, box, knife-edge, campus, v2v")->required();
    fix->add_option("--out", out, "Scene JSON path")->required();
    fix->add_option("--subdiv", subdiv, "Campus wall subdivision")->capture_default_str();
    fix->add_option("--measurements", fixture_meas, "Also write synthetic PL measurements here");
    fix->add_option("--count", count, "Measurement positions")->capture_default_str();
    fix->add_option("--noise", noise, "Gaussian measurement noise, dB")->capture_default_str();
    fix->add_option("--seed", fixture_seed, "Position and noise seed")->capture_default_str();
    fix->add_option("--freq", fixture_freq, "Measurement frequency in Hz")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadArgs;
    }

    try {
        if (*sim) return cmd_simulate(common, sim_ef, tx, rx, freq, time_s, out, tx_ant, rx_ant, tx_power);
        if (*cov) return cmd_coverage(common, cov_ef, tx, freq, grid, tx_power, time_s, out, json_out);
        if (*cal)
            return cmd_calibrate(common, cal_ef, tx, meas, params, validation_count, cal_seed, schedule_file, out,
                                 penalty);
        if (*cmp) return cmd_compare(a, b, delay_gate, angle_gate);
        if (*val) return cmd_validate_scene(common);
        if (*fix) return cmd_fixture(fixture_name, out, subdiv, fixture_meas, count, noise, fixture_seed, fixture_freq);
        if (*srv) {
            ServiceOptions opt;
            if (data_dir.empty()) data_dir = std::getenv("MART_DATA_DIR") ? std::getenv("MART_DATA_DIR") : "mart-data";
            opt.data_dir = data_dir;
            opt.ui_dir = ui_dir;
            opt.max_concurrent_jobs = workers;
            opt.job_threads = srv_threads;
            opt.library = load_library(common.materials);
            Service service(opt);
            std::printf("listening on %s:%d (data %s)\n", host.c_str(), port, data_dir.c_str());
            std::fflush(stdout);
            return service.listen(host, port) ? kOk : kBadArgs;
        }
    } catch (const ArgError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadArgs;
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSceneError;
    } catch (const InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kInfeasible;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSceneError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadArgs;
    }
    return kOk;
}
