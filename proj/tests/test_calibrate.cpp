#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "chantwin/calibrate.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/fixtures.hpp"
#include "chantwin/profiles.hpp"
#include "chantwin/rng.hpp"

using namespace chantwin;

namespace {

MeasurementPoint point(double x, double y, double observed) {
    MeasurementPoint p;
    p.position = {x, y, 1.5};
    p.f_hz = 3.5e9;
    p.observed_db = observed;
    return p;
}

std::vector<MeasurementPoint> numbered(std::size_t n) {
    std::vector<MeasurementPoint> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(point(static_cast<double>(i), 0.0, 80.0 + static_cast<double>(i)));
    return v;
}

EngineConfig small_engine() {
    EngineConfig c = calibration_engine_config();
    c.n_rays = 1u << 12;
    c.image_method = false;
    return c;
}

MaterialLibrary truth_library(double eps) {
    auto lib = default_material_library();
    apply_parameter(lib, ParameterSpec{"concrete", CalibratedField::EpsR, 1.0, 20.0, {}}, eps);
    return lib;
}

struct Synthetic {
    std::shared_ptr<const Scene> scene;
    Terminal tx{{0, -20, 10}, {}, 0.0, {}};
    std::vector<MeasurementPoint> points;
};

const Synthetic& synthetic() {
    static const Synthetic s = [] {
        Synthetic out;
        out.scene = std::make_shared<const Scene>(fixtures::campus().scene);
        const auto pos = fixtures::outdoor_points(*out.scene, 16, 7);
        out.points = synthesize_measurements(*out.scene, out.tx, truth_library(5.0), small_engine(), pos, 3.5e9);
        return out;
    }();
    return s;
}

CalibrationProblem synthetic_problem(std::vector<MeasurementPoint> train, std::vector<MeasurementPoint> validation) {
    const auto& s = synthetic();
    CalibrationProblem p;
    p.scene = s.scene;
    p.tx = s.tx;
    p.library = default_material_library();
    p.parameters = {ParameterSpec{"concrete", CalibratedField::EpsR, 2.0, 8.0, 3.0}};
    p.train = std::move(train);
    p.validation = std::move(validation);
    p.engine = small_engine();
    return p;
}

SaSchedule short_schedule() {
    SaSchedule s;
    s.steps = 12;
    s.moves_per_step = 5;
    return s;
}

}  // namespace

TEST(Measurements, CsvParseAndRoundTrip) {
    const std::string text =
        "x_m,y_m,z_m,freq_hz,observed_db,kind,tx_power_dbm,los_class\n"
        "1,2,1.5,3.5e9,95.5,pl,0,LoS\n"
        "3,4,1.5,3.5e9,-70,rsrp,30,OLoS\n"
        "5,6,1.5,3.5e9,120,pl,0,\n";
    const auto pts = parse_measurements_csv(text);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[0].los_class, LosClass::LoS);
    EXPECT_EQ(pts[1].kind, MeasurementKind::Rsrp);
    EXPECT_DOUBLE_EQ(pts[1].observed_path_loss(), 100.0);
    EXPECT_FALSE(pts[2].los_class);
    EXPECT_EQ(parse_measurements_csv(measurements_csv(pts)), pts);
    EXPECT_THROW(parse_measurements_csv("a,b\n1,2\n"), ParseError);
    EXPECT_THROW(parse_measurements_csv("x_m,y_m,z_m,freq_hz,observed_db,kind,tx_power_dbm,los_class\n1,2,3\n"),
                 ParseError);
    EXPECT_THROW(load_measurements_csv("/nonexistent/points.csv"), ParseError);
}

TEST(Measurements, ValidationAgainstScene) {
    const auto scene = fixtures::box({-5, -5, 0}, {5, 5, 10});
    EXPECT_NO_THROW(validate_measurements({point(0, 5.5, 90)}, scene));
    EXPECT_THROW(validate_measurements({point(100, 0, 90)}, scene), ValidationError);
    EXPECT_THROW(validate_measurements({point(0, 0, std::nan(""))}, scene), ValidationError);
}

TEST(Parameters, SpecParsingAndDomains) {
    const auto p = parse_parameter_spec("concrete.eps_r:2..8@3");
    EXPECT_EQ(p, (ParameterSpec{"concrete", CalibratedField::EpsR, 2.0, 8.0, 3.0}));
    EXPECT_EQ(parse_parameter_spec("glass.sigma:0..0.5").field, CalibratedField::Sigma);
    EXPECT_THROW(parse_parameter_spec("concrete:2..8"), ParseError);
    EXPECT_THROW(parse_parameter_spec("concrete.color:2..8"), ParseError);
    const auto lib = default_material_library();
    EXPECT_THROW(validate_parameter(parse_parameter_spec("unobtainium.eps_r:2..8"), lib), ValidationError);
    EXPECT_THROW(validate_parameter(parse_parameter_spec("concrete.eps_r:8..2"), lib), InfeasibleError);
    EXPECT_THROW(validate_parameter(parse_parameter_spec("concrete.eps_r:0.5..2"), lib), InfeasibleError);
    EXPECT_THROW(validate_parameter(parse_parameter_spec("concrete.sigma:-1..2"), lib), InfeasibleError);
    EXPECT_THROW(validate_parameter(parse_parameter_spec("concrete.scatter_s:0..1.5"), lib), InfeasibleError);
    EXPECT_THROW(validate_parameter(parse_parameter_spec("concrete.eps_r:2..8@9"), lib), InfeasibleError);
    EXPECT_NO_THROW(validate_parameter(parse_parameter_spec("concrete.eps_r:4..4"), lib));
}

TEST(Parameters, StartValuesClampLibraryValue) {
    const auto lib = default_material_library();
    const double eps = lib.at(*lib.find("concrete")).eps_r;
    const auto v = start_values({ParameterSpec{"concrete", CalibratedField::EpsR, 1.0, 20.0, {}},
                                 ParameterSpec{"concrete", CalibratedField::EpsR, 6.0, 8.0, {}},
                                 ParameterSpec{"concrete", CalibratedField::EpsR, 2.0, 8.0, 3.0}},
                                lib);
    EXPECT_DOUBLE_EQ(v[0], eps);
    EXPECT_DOUBLE_EQ(v[1], std::clamp(eps, 6.0, 8.0));
    EXPECT_DOUBLE_EQ(v[2], 3.0);
}

TEST(Parameters, ReflectionStaysInBounds) {
    EXPECT_DOUBLE_EQ(reflect_into(9.0, 2.0, 8.0), 7.0);
    EXPECT_DOUBLE_EQ(reflect_into(1.0, 2.0, 8.0), 3.0);
    EXPECT_DOUBLE_EQ(reflect_into(15.0, 2.0, 8.0), 3.0);
    EXPECT_DOUBLE_EQ(reflect_into(4.0, 4.0, 4.0), 4.0);
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.uniform(-100, 100);
        const double r = reflect_into(x, 2.0, 8.0);
        EXPECT_GE(r, 2.0);
        EXPECT_LE(r, 8.0);
    }
}

TEST(Schedule, ParsingAndValidation) {
    EXPECT_EQ(parse_sa_schedule("{}"), SaSchedule{});
    const auto s = parse_sa_schedule(R"({"t0": 10, "cooling": 0.9, "steps": 5, "moves_per_step": 2, "seed": 9})");
    EXPECT_DOUBLE_EQ(s.t0, 10.0);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_THROW(parse_sa_schedule(R"({"temperature": 1})"), ParseError);
    SaSchedule bad;
    bad.cooling = 1.0;
    EXPECT_THROW(validate_schedule(bad), ValidationError);
    bad = {};
    bad.steps = 0;
    EXPECT_THROW(validate_schedule(bad), ValidationError);
}

TEST(Objective, SinglePointRmse) {
    EXPECT_NEAR(pl_rmse({90.0}, {94.5}), 4.5, 1e-12);
    EXPECT_NEAR(pl_rmse({std::nullopt, 80.0}, {90.0, 80.0}), std::sqrt(30.0 * 30.0 / 2.0), 1e-12);
    EXPECT_NEAR(pl_rmse({std::nullopt}, {90.0}, 10.0), 10.0, 1e-12);
}

TEST(Objective, SelfConsistentAndOrderInvariant) {
    const auto& s = synthetic();
    ASSERT_GE(s.points.size(), 12u);
    const auto problem = synthetic_problem(s.points, {});
    EXPECT_LT(objective({5.0}, problem, s.points), 0.1);
    const double off = objective({3.0}, problem, s.points);
    EXPECT_GT(off, 0.1);
    auto shuffled = s.points;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(objective({3.0}, problem, shuffled), off, 1e-9);
}

TEST(Objective, ParallelEvaluationMatchesSequential) {
    const auto& s = synthetic();
    const auto problem = synthetic_problem(s.points, {});
    CalibrationEvaluator seq(*s.scene, s.tx, problem.library, problem.parameters, s.points, problem.engine, 0.0, 1);
    CalibrationEvaluator par(*s.scene, s.tx, problem.library, problem.parameters, s.points, problem.engine, 0.0, 4);
    EXPECT_EQ(seq.predict({4.2}), par.predict({4.2}));
}

TEST(Split, CountsAndDeterminism) {
    const auto pts = numbered(119);
    const auto a = split_points(pts, 30, 1);
    EXPECT_EQ(a.train.size(), 89u);
    EXPECT_EQ(a.validation.size(), 30u);
    std::multiset<double> all;
    for (const auto& p : a.train) all.insert(p.observed_db);
    for (const auto& p : a.validation) all.insert(p.observed_db);
    EXPECT_EQ(all.size(), 119u);
    EXPECT_EQ(std::set<double>(all.begin(), all.end()).size(), 119u);
    const auto b = split_points(pts, 30, 1);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_NE(split_points(pts, 30, 2).validation, a.validation);
    EXPECT_THROW(split_points(pts, 0, 1), InfeasibleError);
    EXPECT_THROW(split_points(pts, 119, 1), InfeasibleError);
}

TEST(Annealing, DegenerateBoundsReturnThoseValues) {
    const auto& s = synthetic();
    auto problem = synthetic_problem(s.points, {});
    problem.parameters = {ParameterSpec{"concrete", CalibratedField::EpsR, 4.0, 4.0, {}}};
    const auto r = simulated_annealing(problem, short_schedule());
    EXPECT_EQ(r.best_params, std::vector<double>{4.0});
    EXPECT_EQ(r.rmse_train_after, r.rmse_train_before);
}

TEST(Annealing, TraceInvariantsAndReport) {
    const auto& s = synthetic();
    const auto split = split_points(s.points, 4, 1);
    const auto problem = synthetic_problem(split.train, split.validation);
    const auto sched = short_schedule();
    const auto r = simulated_annealing(problem, sched);
    ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(sched.steps * sched.moves_per_step));
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].best, r.trace[i - 1].best);
    EXPECT_LE(r.rmse_train_after, r.rmse_train_before);
    EXPECT_NEAR(r.trace.back().best, r.rmse_train_after, 1e-12);
    EXPECT_GE(r.best_params[0], 2.0);
    EXPECT_LE(r.best_params[0], 8.0);
    EXPECT_EQ(r.n_train, split.train.size());
    EXPECT_EQ(r.n_validation, split.validation.size());

    EXPECT_EQ(simulated_annealing(problem, sched), r);
    EXPECT_EQ(parse_calibration_report(calibration_report_json(r)), r);
    const auto table = calibration_report_table(r);
    EXPECT_NE(table.find("concrete"), std::string::npos);
    EXPECT_THROW(parse_calibration_report(R"({"schema_version": 7})"), ParseError);
}

TEST(Annealing, ValidationPointsDoNotSteerTheSearch) {
    const auto& s = synthetic();
    const auto split = split_points(s.points, 4, 1);
    auto mutated = split.validation;
    for (auto& p : mutated) p.observed_db += 25.0;
    const auto a = simulated_annealing(synthetic_problem(split.train, split.validation), short_schedule());
    const auto b = simulated_annealing(synthetic_problem(split.train, mutated), short_schedule());
    EXPECT_EQ(a.best_params, b.best_params);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_NE(a.rmse_validation_after, b.rmse_validation_after);
}

TEST(Annealing, RecoversSyntheticPermittivity) {
    const auto& s = synthetic();
    const auto split = split_points(s.points, 4, 1);
    SaSchedule sched;
    sched.steps = 30;
    const auto r = simulated_annealing(synthetic_problem(split.train, split.validation), sched);
    EXPECT_NEAR(r.best_params[0], 5.0, 0.5);
    EXPECT_LT(r.rmse_validation_after, 1.0);
    EXPECT_LT(r.rmse_validation_after, r.rmse_validation_before);
}
