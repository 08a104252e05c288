#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chantwin/channel.hpp"
#include "chantwin/engine.hpp"

namespace chantwin {

enum class MeasurementKind { PathLoss, Rsrp };
enum class LosClass { LoS, OLoS, NLoS };

struct MeasurementPoint {
    Vec3 position;
    double f_hz = 0.0;
    double observed_db = 0.0;  // PL dB or RSRP dBm
    MeasurementKind kind = MeasurementKind::PathLoss;
    double tx_power_dbm = 0.0;
    std::optional<LosClass> los_class;

    double observed_path_loss() const;

    bool operator==(const MeasurementPoint&) const = default;
};

/// Header: x_m,y_m,z_m,freq_hz,observed_db,kind,tx_power_dbm,los_class
std::vector<MeasurementPoint> parse_measurements_csv(const std::string& text);
std::vector<MeasurementPoint> load_measurements_csv(const std::filesystem::path& path);
std::string measurements_csv(const std::vector<MeasurementPoint>& points);

/// Rejects non-finite values and positions outside the (slightly padded) scene bounds.
void validate_measurements(const std::vector<MeasurementPoint>& points, const Scene& scene);

enum class CalibratedField { EpsR, Sigma, ScatterS };

const char* field_name(CalibratedField f);

struct ParameterSpec {
    std::string material;
    CalibratedField field = CalibratedField::EpsR;
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> start;  // library value clamped into bounds when unset

    bool operator==(const ParameterSpec&) const = default;
};

/// "material.field:lo..hi" with an optional "@start" suffix.
ParameterSpec parse_parameter_spec(const std::string& text);

/// Resolves the material and checks bounds against the field's physical domain.
void validate_parameter(const ParameterSpec& p, const MaterialLibrary& lib);

/// Writes one value into the library. Frequency tables of the field are cleared.
void apply_parameter(MaterialLibrary& lib, const ParameterSpec& p, double value);

struct SaSchedule {
    double t0 = 25.0;  // dB^2, compared against changes of the mean squared error
    double cooling = 0.95;
    int steps = 60;
    int moves_per_step = 10;
    double step_scale = 0.1;
    std::uint64_t seed = 1;

    bool operator==(const SaSchedule&) const = default;
};

void validate_schedule(const SaSchedule& s);
SaSchedule parse_sa_schedule(const std::string& json_text);
SaSchedule load_sa_schedule(const std::filesystem::path& path);

/// Offline profile with 2^16 rays.
EngineConfig calibration_engine_config();

struct CalibrationProblem {
    std::shared_ptr<const Scene> scene;
    Terminal tx;
    MaterialLibrary library;
    std::vector<ParameterSpec> parameters;
    std::vector<MeasurementPoint> train;
    std::vector<MeasurementPoint> validation;
    EngineConfig engine = calibration_engine_config();
    double time_s = 0.0;
    double no_coverage_penalty_db = 30.0;
    PathLossMode mode = PathLossMode::Incoherent;
    AntennaPattern rx_antenna;
    int threads = 1;
};

/// Path geometry of every measurement point traced once; objective evaluations only redo fields.
class CalibrationEvaluator {
public:
    CalibrationEvaluator(const Scene& scene, const Terminal& tx, const MaterialLibrary& library,
                         std::vector<ParameterSpec> parameters, std::vector<MeasurementPoint> points,
                         const EngineConfig& engine, double time_s = 0.0, int threads = 1,
                         PathLossMode mode = PathLossMode::Incoherent, AntennaPattern rx_antenna = {});

    /// Predicted PL per point for the given parameter values; nullopt = no coverage.
    std::vector<std::optional<double>> predict(const std::vector<double>& values) const;

    /// RMSE over the selected points (all when `subset` is null).
    double rmse(const std::vector<double>& values, const std::vector<std::size_t>* subset = nullptr,
                double no_coverage_penalty_db = 30.0) const;

    MaterialLibrary library_with(const std::vector<double>& values) const;
    const std::vector<MeasurementPoint>& points() const { return points_; }
    const std::vector<ParameterSpec>& parameters() const { return parameters_; }

private:
    MaterialLibrary base_;
    std::vector<ParameterSpec> parameters_;
    std::vector<MeasurementPoint> points_;
    std::vector<LinkGeometry> geometry_;
    AntennaPattern tx_antenna_;
    AntennaPattern rx_antenna_;
    double floor_db_;
    int threads_;
    PathLossMode mode_;
};

/// RMSE in dB; a missing prediction counts as an error of `no_coverage_penalty_db`.
double pl_rmse(const std::vector<std::optional<double>>& predicted, const std::vector<double>& observed,
               double no_coverage_penalty_db = 30.0);

/// RMSE of predicted vs observed PL over `points` with the given parameter values.
double objective(const std::vector<double>& values, const CalibrationProblem& problem,
                 const std::vector<MeasurementPoint>& points);

struct TraceEntry {
    double current = 0.0;  // RMSE of the chain state after the move
    double best = 0.0;     // best-so-far RMSE
    double temperature = 0.0;
    bool accepted = false;

    bool operator==(const TraceEntry&) const = default;
};

struct CalibrationResult {
    std::vector<ParameterSpec> parameters;
    std::vector<double> start_params;
    std::vector<double> best_params;
    double rmse_train_before = 0.0;
    double rmse_train_after = 0.0;
    double rmse_validation_before = 0.0;
    double rmse_validation_after = 0.0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    SaSchedule schedule;
    std::vector<TraceEntry> trace;

    bool operator==(const CalibrationResult&) const = default;
};

std::vector<double> start_values(const std::vector<ParameterSpec>& parameters, const MaterialLibrary& lib);

/// Folds `x` back into [lo, hi] by repeated mirroring at the bounds.
double reflect_into(double x, double lo, double hi);

CalibrationResult simulated_annealing(const CalibrationProblem& problem, const SaSchedule& schedule);

struct PointSplit {
    std::vector<MeasurementPoint> train;
    std::vector<MeasurementPoint> validation;
};

PointSplit split_points(const std::vector<MeasurementPoint>& points, std::size_t validation_count,
                        std::uint64_t seed);

inline constexpr int kCalibrationReportSchemaVersion = 1;

std::string calibration_report_json(const CalibrationResult& result, int indent = 2);
CalibrationResult parse_calibration_report(const std::string& json_text);
std::string calibration_report_table(const CalibrationResult& result);

/// Engine-generated PL observations (optionally with Gaussian noise) for synthetic experiments.
/// Points without coverage are skipped.
std::vector<MeasurementPoint> synthesize_measurements(const Scene& scene, const Terminal& tx,
                                                      const MaterialLibrary& lib, const EngineConfig& engine,
                                                      const std::vector<Vec3>& positions, double f_hz,
                                                      double noise_db = 0.0, std::uint64_t seed = 0,
                                                      int threads = 1);

}  // namespace chantwin
