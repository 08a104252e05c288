#include "chantwin/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"
#include "chantwin/parallel.hpp"
#include "chantwin/profiles.hpp"
#include "chantwin/rng.hpp"

namespace chantwin {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("invalid number for " + what + ": '" + s + "'");
    }
}

std::string read_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ParseError(std::string("cannot open ") + what + " " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* los_name(LosClass c) {
    switch (c) {
        case LosClass::LoS: return "LoS";
        case LosClass::OLoS: return "OLoS";
        case LosClass::NLoS: return "NLoS";
    }
    return "";
}

CalibratedField field_from_name(const std::string& s) {
    if (s == "eps_r") return CalibratedField::EpsR;
    if (s == "sigma") return CalibratedField::Sigma;
    if (s == "scatter_s") return CalibratedField::ScatterS;
    throw ParseError("unknown calibration field '" + s + "' (valid: eps_r, sigma, scatter_s)");
}

double field_value(const Material& m, CalibratedField f) {
    switch (f) {
        case CalibratedField::EpsR: return m.eps_r;
        case CalibratedField::Sigma: return m.sigma;
        case CalibratedField::ScatterS: return m.scatter_s;
    }
    return 0.0;
}

}  // namespace

double MeasurementPoint::observed_path_loss() const {
    return kind == MeasurementKind::PathLoss ? observed_db : tx_power_dbm - observed_db;
}

std::vector<MeasurementPoint> parse_measurements_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::vector<MeasurementPoint> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split(line, ',');
        if (!header) {
            static const std::vector<std::string> expected = {"x_m", "y_m", "z_m", "freq_hz", "observed_db",
                                                              "kind", "tx_power_dbm", "los_class"};
            auto got = cols;
            if (got.size() == expected.size() && got[5].rfind("kind", 0) == 0) got[5] = "kind";
            if (got != expected)
                throw ParseError("measurement CSV header must be x_m,y_m,z_m,freq_hz,observed_db,kind,tx_power_dbm,los_class");
            header = true;
            continue;
        }
        if (cols.size() != 8)
            throw ParseError("measurement CSV line " + std::to_string(line_no) + ": expected 8 columns");
        const auto where = "line " + std::to_string(line_no);
        MeasurementPoint p;
        p.position = {parse_number(cols[0], where + " x_m"), parse_number(cols[1], where + " y_m"),
                      parse_number(cols[2], where + " z_m")};
        p.f_hz = parse_number(cols[3], where + " freq_hz");
        p.observed_db = parse_number(cols[4], where + " observed_db");
        const auto kind = lower(cols[5]);
        if (kind == "pl") p.kind = MeasurementKind::PathLoss;
        else if (kind == "rsrp") p.kind = MeasurementKind::Rsrp;
        else throw ParseError(where + ": kind must be pl or rsrp");
        p.tx_power_dbm = cols[6].empty() ? 0.0 : parse_number(cols[6], where + " tx_power_dbm");
        const auto los = lower(cols[7]);
        if (los == "los") p.los_class = LosClass::LoS;
        else if (los == "olos") p.los_class = LosClass::OLoS;
        else if (los == "nlos") p.los_class = LosClass::NLoS;
        else if (!los.empty()) throw ParseError(where + ": los_class must be LoS, OLoS, NLoS or empty");
        if (!std::isfinite(p.observed_db) || !is_finite(p.position) || !(p.f_hz > 0.0) ||
            !std::isfinite(p.tx_power_dbm))
            throw ValidationError(where + ": values must be finite and frequency positive");
        out.push_back(p);
    }
    if (!header) throw ParseError("measurement CSV is empty");
    return out;
}

std::vector<MeasurementPoint> load_measurements_csv(const std::filesystem::path& path) {
    return parse_measurements_csv(read_file(path, "measurement file"));
}

std::string measurements_csv(const std::vector<MeasurementPoint>& points) {
    std::string out = "x_m,y_m,z_m,freq_hz,observed_db,kind,tx_power_dbm,los_class\n";
    char buf[256];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%s\n", p.position.x, p.position.y,
                      p.position.z, p.f_hz, p.observed_db, p.kind == MeasurementKind::PathLoss ? "pl" : "rsrp",
                      p.tx_power_dbm, p.los_class ? los_name(*p.los_class) : "");
        out += buf;
    }
    return out;
}

void validate_measurements(const std::vector<MeasurementPoint>& points, const Scene& scene) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const auto who = "measurement " + std::to_string(i);
        if (!std::isfinite(p.observed_db) || !is_finite(p.position) || !(p.f_hz > 0.0))
            throw ValidationError(who + ": non-finite value or non-positive frequency");
        if (!scene.bounds.empty()) {
            const auto& b = scene.bounds;
            constexpr double pad = 1.0;
            if (p.position.x < b.lo.x - pad || p.position.x > b.hi.x + pad || p.position.y < b.lo.y - pad ||
                p.position.y > b.hi.y + pad)
                throw ValidationError(who + ": position outside the scene bounds");
        }
    }
}

const char* field_name(CalibratedField f) {
    switch (f) {
        case CalibratedField::EpsR: return "eps_r";
        case CalibratedField::Sigma: return "sigma";
        case CalibratedField::ScatterS: return "scatter_s";
    }
    return "";
}

ParameterSpec parse_parameter_spec(const std::string& text) {
    const auto colon = text.find(':');
    const auto dot = text.substr(0, colon).rfind('.');
    if (colon == std::string::npos || dot == std::string::npos || dot == 0)
        throw ParseError("parameter must look like material.field:lo..hi, got '" + text + "'");
    ParameterSpec p;
    p.material = text.substr(0, dot);
    p.field = field_from_name(text.substr(dot + 1, colon - dot - 1));
    std::string range = text.substr(colon + 1);
    if (const auto at = range.find('@'); at != std::string::npos) {
        p.start = parse_number(range.substr(at + 1), "parameter start");
        range = range.substr(0, at);
    }
    const auto dots = range.find("..");
    if (dots == std::string::npos) throw ParseError("parameter range must be lo..hi, got '" + range + "'");
    p.lo = parse_number(range.substr(0, dots), "parameter lower bound");
    p.hi = parse_number(range.substr(dots + 2), "parameter upper bound");
    return p;
}

void validate_parameter(const ParameterSpec& p, const MaterialLibrary& lib) {
    const auto who = p.material + "." + field_name(p.field);
    if (!lib.find(p.material)) throw ValidationError("unknown material '" + p.material + "' in " + who);
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi)) throw InfeasibleError(who + ": bounds must be finite");
    if (p.lo > p.hi) throw InfeasibleError(who + ": lower bound exceeds upper bound");
    double dlo = 0.0, dhi = std::numeric_limits<double>::infinity();
    if (p.field == CalibratedField::EpsR) dlo = 1.0;
    if (p.field == CalibratedField::ScatterS) dhi = 1.0;
    if (p.lo < dlo || p.hi > dhi) throw InfeasibleError(who + ": bounds outside the physical domain");
    if (p.start && (*p.start < p.lo || *p.start > p.hi)) throw InfeasibleError(who + ": start outside bounds");
}

void apply_parameter(MaterialLibrary& lib, const ParameterSpec& p, double value) {
    auto& m = lib.mutable_at(*lib.find(p.material));
    switch (p.field) {
        case CalibratedField::EpsR:
            m.eps_r = value;
            m.eps_r_table.clear();
            break;
        case CalibratedField::Sigma:
            m.sigma = value;
            m.sigma_table.clear();
            break;
        case CalibratedField::ScatterS: m.scatter_s = value; break;
    }
}

void validate_schedule(const SaSchedule& s) {
    if (!(s.t0 > 0.0) || !(s.cooling > 0.0 && s.cooling < 1.0) || s.steps <= 0 || s.moves_per_step <= 0 ||
        !(s.step_scale > 0.0))
        throw ValidationError("SA schedule: t0, steps, moves_per_step and step_scale must be positive and cooling in (0, 1)");
}

SaSchedule parse_sa_schedule(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("schedule file: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("schedule file must hold a JSON object");
    SaSchedule s;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "schema_version") continue;
            if (key == "t0") s.t0 = value.get<double>();
            else if (key == "cooling") s.cooling = value.get<double>();
            else if (key == "steps") s.steps = value.get<int>();
            else if (key == "moves_per_step") s.moves_per_step = value.get<int>();
            else if (key == "step_scale") s.step_scale = value.get<double>();
            else if (key == "seed") s.seed = value.get<std::uint64_t>();
            else throw ParseError("schedule file: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("schedule file: ") + e.what());
    }
    validate_schedule(s);
    return s;
}

SaSchedule load_sa_schedule(const std::filesystem::path& path) {
    return parse_sa_schedule(read_file(path, "schedule file"));
}

EngineConfig calibration_engine_config() {
    auto cfg = builtin_profile("offline").engine;
    cfg.n_rays = 1u << 16;
    return cfg;
}

CalibrationEvaluator::CalibrationEvaluator(const Scene& scene, const Terminal& tx, const MaterialLibrary& library,
                                           std::vector<ParameterSpec> parameters,
                                           std::vector<MeasurementPoint> points, const EngineConfig& engine,
                                           double time_s, int threads, PathLossMode mode, AntennaPattern rx_antenna)
    : base_(library),
      parameters_(std::move(parameters)),
      points_(std::move(points)),
      tx_antenna_(tx.antenna),
      rx_antenna_(std::move(rx_antenna)),
      floor_db_(engine.rel_power_floor_db),
      threads_(threads),
      mode_(mode) {
    validate_config(engine);
    for (const auto& p : parameters_) validate_parameter(p, base_);
    LinkOptions options{threads, std::vector<bool>(base_.size(), false)};
    for (const auto& p : parameters_)
        if (p.field == CalibratedField::ScatterS) options.force_scatter_materials[*base_.find(p.material)] = true;

    auto snap = std::make_shared<const SceneSnapshot>(make_snapshot(scene, time_s, engine));
    const Vec3 tx_pos = tx.world_position(scene, time_s);
    geometry_.resize(points_.size());
    std::map<double, std::vector<std::size_t>> by_frequency;
    for (std::size_t i = 0; i < points_.size(); ++i) by_frequency[points_[i].f_hz].push_back(i);
    for (const auto& [f, idx] : by_frequency) {
        LinkContext ctx(snap, tx_pos, engine, base_, f, options);
        std::vector<Vec3> rx;
        for (auto i : idx) rx.push_back(points_[i].position);
        ctx.prepare_receivers(rx);
        parallel_for(idx.size(), threads, [&](std::size_t k) {
            auto g = ctx.geometry_for_prepared(k);
            g.time_s = time_s;
            geometry_[idx[k]] = std::move(g);
        });
    }
}

MaterialLibrary CalibrationEvaluator::library_with(const std::vector<double>& values) const {
    if (values.size() != parameters_.size()) throw ValidationError("parameter vector has the wrong length");
    MaterialLibrary lib = base_;
    for (std::size_t i = 0; i < values.size(); ++i) apply_parameter(lib, parameters_[i], values[i]);
    return lib;
}

std::vector<std::optional<double>> CalibrationEvaluator::predict(const std::vector<double>& values) const {
    const auto lib = library_with(values);
    std::vector<std::optional<double>> out(points_.size());
    parallel_for(points_.size(), threads_, [&](std::size_t i) {
        out[i] = path_loss(evaluate_link(geometry_[i], lib, tx_antenna_, rx_antenna_, floor_db_), mode_);
    });
    return out;
}

double CalibrationEvaluator::rmse(const std::vector<double>& values, const std::vector<std::size_t>* subset,
                                  double no_coverage_penalty_db) const {
    const auto pred = predict(values);
    std::vector<std::optional<double>> p;
    std::vector<double> o;
    if (subset) {
        for (auto i : *subset) {
            p.push_back(pred.at(i));
            o.push_back(points_.at(i).observed_path_loss());
        }
    } else {
        p = pred;
        for (const auto& m : points_) o.push_back(m.observed_path_loss());
    }
    return pl_rmse(p, o, no_coverage_penalty_db);
}

double pl_rmse(const std::vector<std::optional<double>>& predicted, const std::vector<double>& observed,
               double no_coverage_penalty_db) {
    if (predicted.size() != observed.size()) throw ValidationError("prediction and observation counts differ");
    if (predicted.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] ? *predicted[i] - observed[i] : no_coverage_penalty_db;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

double objective(const std::vector<double>& values, const CalibrationProblem& problem,
                 const std::vector<MeasurementPoint>& points) {
    if (!problem.scene) throw ValidationError("calibration problem has no scene");
    for (std::size_t i = 0; i < problem.parameters.size() && i < values.size(); ++i) {
        const auto& p = problem.parameters[i];
        if (values[i] < p.lo || values[i] > p.hi) throw ValidationError("parameter value outside bounds");
    }
    CalibrationEvaluator ev(*problem.scene, problem.tx, problem.library, problem.parameters, points, problem.engine,
                            problem.time_s, problem.threads, problem.mode, problem.rx_antenna);
    return ev.rmse(values, nullptr, problem.no_coverage_penalty_db);
}

std::vector<double> start_values(const std::vector<ParameterSpec>& parameters, const MaterialLibrary& lib) {
    std::vector<double> out;
    for (const auto& p : parameters) {
        const auto id = lib.find(p.material);
        if (!id) throw ValidationError("unknown material '" + p.material + "'");
        out.push_back(p.start ? *p.start : std::clamp(field_value(lib.at(*id), p.field), p.lo, p.hi));
    }
    return out;
}

double reflect_into(double x, double lo, double hi) {
    if (!(hi > lo)) return lo;
    const double w = hi - lo;
    double t = std::fmod(x - lo, 2.0 * w);
    if (t < 0.0) t += 2.0 * w;
    const double v = t <= w ? lo + t : hi - (t - w);
    return std::clamp(v, lo, hi);
}

CalibrationResult simulated_annealing(const CalibrationProblem& problem, const SaSchedule& schedule) {
    validate_schedule(schedule);
    if (problem.parameters.empty()) throw ValidationError("calibration needs at least one parameter");
    if (problem.train.empty()) throw ValidationError("calibration needs at least one training point");
    if (!problem.scene) throw ValidationError("calibration problem has no scene");

    std::vector<MeasurementPoint> all = problem.train;
    all.insert(all.end(), problem.validation.begin(), problem.validation.end());
    std::vector<std::size_t> train_idx(problem.train.size()), val_idx(problem.validation.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
    for (std::size_t i = 0; i < val_idx.size(); ++i) val_idx[i] = problem.train.size() + i;

    const CalibrationEvaluator ev(*problem.scene, problem.tx, problem.library, problem.parameters, std::move(all),
                                  problem.engine, problem.time_s, problem.threads, problem.mode, problem.rx_antenna);
    const double penalty = problem.no_coverage_penalty_db;
    auto train_rmse = [&](const std::vector<double>& v) { return ev.rmse(v, &train_idx, penalty); };
    auto val_rmse = [&](const std::vector<double>& v) { return val_idx.empty() ? 0.0 : ev.rmse(v, &val_idx, penalty); };

    CalibrationResult res;
    res.parameters = problem.parameters;
    res.schedule = schedule;
    res.n_train = problem.train.size();
    res.n_validation = problem.validation.size();
    res.start_params = start_values(problem.parameters, problem.library);

    std::vector<double> x = res.start_params;
    double fx = train_rmse(x);
    std::vector<double> best = x;
    double fbest = fx;
    res.rmse_train_before = fx;
    res.rmse_validation_before = val_rmse(x);

    Rng rng(schedule.seed);
    double temperature = schedule.t0;
    res.trace.reserve(static_cast<std::size_t>(schedule.steps) * schedule.moves_per_step);
    for (int step = 0; step < schedule.steps; ++step) {
        for (int move = 0; move < schedule.moves_per_step; ++move) {
            std::vector<double> y = x;
            for (std::size_t i = 0; i < y.size(); ++i) {
                const auto& p = problem.parameters[i];
                const double sigma = schedule.step_scale * (p.hi - p.lo);
                y[i] = reflect_into(x[i] + sigma * rng.normal(), p.lo, p.hi);
            }
            const double fy = train_rmse(y);
            const double delta = fy * fy - fx * fx;
            const double u = rng.uniform();
            const bool accept = delta <= 0.0 || u < std::exp(-delta / temperature);
            if (accept) {
                x = std::move(y);
                fx = fy;
                if (fx < fbest) {
                    fbest = fx;
                    best = x;
                }
            }
            res.trace.push_back({fx, fbest, temperature, accept});
        }
        temperature *= schedule.cooling;
    }
    res.best_params = best;
    res.rmse_train_after = fbest;
    res.rmse_validation_after = val_rmse(best);
    return res;
}

PointSplit split_points(const std::vector<MeasurementPoint>& points, std::size_t validation_count,
                        std::uint64_t seed) {
    if (validation_count == 0 || validation_count >= points.size())
        throw InfeasibleError("validation count must lie in [1, " +
                              std::to_string(points.empty() ? 0 : points.size() - 1) + "], got " +
                              std::to_string(validation_count));
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    PointSplit out;
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < validation_count ? out.validation : out.train).push_back(points[order[k]]);
    return out;
}

std::string calibration_report_json(const CalibrationResult& r, int indent) {
    json params = json::array();
    for (std::size_t i = 0; i < r.parameters.size(); ++i) {
        const auto& p = r.parameters[i];
        params.push_back({{"material", p.material},
                          {"field", field_name(p.field)},
                          {"lo", p.lo},
                          {"hi", p.hi},
                          {"start", r.start_params.at(i)},
                          {"start_explicit", p.start.has_value()},
                          {"best", r.best_params.at(i)}});
    }
    json current = json::array(), best = json::array(), temp = json::array(), accepted = json::array();
    std::size_t n_accepted = 0;
    for (const auto& t : r.trace) {
        current.push_back(t.current);
        best.push_back(t.best);
        temp.push_back(t.temperature);
        accepted.push_back(t.accepted);
        n_accepted += t.accepted;
    }
    json doc = {
        {"schema_version", kCalibrationReportSchemaVersion},
        {"parameters", params},
        {"rmse_train_before_db", r.rmse_train_before},
        {"rmse_train_after_db", r.rmse_train_after},
        {"rmse_validation_before_db", r.rmse_validation_before},
        {"rmse_validation_after_db", r.rmse_validation_after},
        {"n_train", r.n_train},
        {"n_validation", r.n_validation},
        {"schedule",
         {{"t0", r.schedule.t0},
          {"cooling", r.schedule.cooling},
          {"steps", r.schedule.steps},
          {"moves_per_step", r.schedule.moves_per_step},
          {"step_scale", r.schedule.step_scale},
          {"seed", r.schedule.seed}}},
        {"trace",
         {{"length", r.trace.size()},
          {"accepted_fraction", r.trace.empty() ? 0.0 : static_cast<double>(n_accepted) / r.trace.size()},
          {"current_db", current},
          {"best_db", best},
          {"temperature", temp},
          {"accepted", accepted}}},
    };
    return doc.dump(indent);
}

CalibrationResult parse_calibration_report(const std::string& json_text) {
    try {
        const auto doc = json::parse(json_text);
        if (doc.at("schema_version").get<int>() != kCalibrationReportSchemaVersion)
            throw ParseError("calibration report: unsupported schema_version");
        CalibrationResult r;
        for (const auto& p : doc.at("parameters")) {
            ParameterSpec s;
            s.material = p.at("material").get<std::string>();
            s.field = field_from_name(p.at("field").get<std::string>());
            s.lo = p.at("lo").get<double>();
            s.hi = p.at("hi").get<double>();
            r.start_params.push_back(p.at("start").get<double>());
            if (p.value("start_explicit", false)) s.start = r.start_params.back();
            r.parameters.push_back(s);
            r.best_params.push_back(p.at("best").get<double>());
        }
        r.rmse_train_before = doc.at("rmse_train_before_db").get<double>();
        r.rmse_train_after = doc.at("rmse_train_after_db").get<double>();
        r.rmse_validation_before = doc.at("rmse_validation_before_db").get<double>();
        r.rmse_validation_after = doc.at("rmse_validation_after_db").get<double>();
        r.n_train = doc.at("n_train").get<std::size_t>();
        r.n_validation = doc.at("n_validation").get<std::size_t>();
        const auto& s = doc.at("schedule");
        r.schedule = {s.at("t0").get<double>(),       s.at("cooling").get<double>(),
                      s.at("steps").get<int>(),       s.at("moves_per_step").get<int>(),
                      s.at("step_scale").get<double>(), s.at("seed").get<std::uint64_t>()};
        const auto& t = doc.at("trace");
        const auto n = t.at("length").get<std::size_t>();
        const auto& cur = t.at("current_db");
        const auto& best = t.at("best_db");
        const auto& temp = t.at("temperature");
        const auto& acc = t.at("accepted");
        if (cur.size() != n || best.size() != n || temp.size() != n || acc.size() != n)
            throw ParseError("calibration report: trace arrays disagree with trace length");
        for (std::size_t i = 0; i < n; ++i)
            r.trace.push_back({cur[i].get<double>(), best[i].get<double>(), temp[i].get<double>(), acc[i].get<bool>()});
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("calibration report: ") + e.what());
    }
}

std::string calibration_report_table(const CalibrationResult& r) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %10s\n", "parameter", "lo", "hi", "start", "best");
    out += buf;
    for (std::size_t i = 0; i < r.parameters.size(); ++i) {
        const auto& p = r.parameters[i];
        const auto name = p.material + "." + field_name(p.field);
        std::snprintf(buf, sizeof buf, "%-24s %10.4f %10.4f %10.4f %10.4f\n", name.c_str(), p.lo, p.hi,
                      r.start_params[i], r.best_params[i]);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "\n%-12s %8s %12s %12s\n", "set", "points", "before_dB", "after_dB");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-12s %8zu %12.3f %12.3f\n", "train", r.n_train, r.rmse_train_before,
                  r.rmse_train_after);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-12s %8zu %12.3f %12.3f\n", "validation", r.n_validation,
                  r.rmse_validation_before, r.rmse_validation_after);
    out += buf;
    std::size_t accepted = 0;
    for (const auto& t : r.trace) accepted += t.accepted;
    std::snprintf(buf, sizeof buf, "\ntrace: %zu moves, %zu accepted, best %.3f dB\n", r.trace.size(), accepted,
                  r.trace.empty() ? r.rmse_train_after : r.trace.back().best);
    out += buf;
    return out;
}

std::vector<MeasurementPoint> synthesize_measurements(const Scene& scene, const Terminal& tx,
                                                      const MaterialLibrary& lib, const EngineConfig& engine,
                                                      const std::vector<Vec3>& positions, double f_hz,
                                                      double noise_db, std::uint64_t seed, int threads) {
    std::vector<MeasurementPoint> base;
    for (const auto& p : positions) base.push_back({p, f_hz, 0.0, MeasurementKind::PathLoss, tx.power_dbm, {}});
    const CalibrationEvaluator ev(scene, tx, lib, {}, base, engine, 0.0, threads);
    const auto pred = ev.predict({});
    auto snap = make_snapshot(scene, 0.0, engine);
    const Vec3 tx_pos = tx.world_position(scene, 0.0);
    Rng rng(seed);
    std::vector<MeasurementPoint> out;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (!pred[i]) continue;
        auto m = base[i];
        m.observed_db = *pred[i] + (noise_db > 0.0 ? noise_db * rng.normal() : 0.0);
        m.los_class = snap.bvh.visible(tx_pos, m.position, 1e-6) ? LosClass::LoS : LosClass::NLoS;
        out.push_back(m);
    }
    return out;
}

}  // namespace chantwin
