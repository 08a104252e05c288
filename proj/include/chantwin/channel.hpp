#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chantwin/engine.hpp"

namespace chantwin {

enum class PathLossMode {
    Incoherent,  // -10 log10 sum |a_i|^2
    Coherent,    // -10 log10 |sum a_i|^2
};

/// nullopt encodes "no coverage".
std::optional<double> path_loss(const ChannelRealization& r, PathLossMode mode = PathLossMode::Incoherent);
std::optional<double> rsrp(const ChannelRealization& r, double tx_power_dbm,
                           PathLossMode mode = PathLossMode::Incoherent);

/// Power-weighted RMS delay spread in seconds; 0 for fewer than two paths.
double rms_delay_spread(const ChannelRealization& r);

enum class AngleSide { Arrival, Departure };

/// Power-weighted circular azimuth spread in degrees: sqrt(2 (1 - R)) with R the mean
/// resultant length.
double angular_spread(const ChannelRealization& r, AngleSide side);

struct Cir {
    double tap_spacing = 0.0;
    std::vector<Complex> taps;
    double reference_delay = 0.0;  // delay of tap 0
};

inline constexpr int kCirPaddingTaps = 128;

/// Sinc-interpolated taps at 1/bandwidth spacing; the earliest path falls on tap kCirPaddingTaps.
Cir synthesize_cir(const ChannelRealization& r, double bandwidth_hz);

struct SimilarityGates {
    double delay_gate_s = 10e-9;
    double angle_gate_deg = 10.0;
};

/// Great-circle angle between two (azimuth, elevation) directions, degrees.
double angular_distance_deg(const Angles& a, const Angles& b);

/// Gated greedy matching; 100 * sum of matched min powers / max of the total powers.
double similarity_index(const ChannelRealization& a, const ChannelRealization& b,
                        const SimilarityGates& gates = {});

struct GridSpec {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
    double step = 1.0;
    double height = 1.5;

    int nx() const;
    int ny() const;
};

GridSpec parse_grid_spec(const std::string& text);  // "xmin,ymin,xmax,ymax,step[,height]"
void validate_grid(const GridSpec& g);

enum class CellMask { None, InsideGeometry, NoCoverage, Error };

const char* mask_name(CellMask m);

struct CoverageCell {
    Vec3 position;
    std::optional<double> pl_db;
    std::optional<double> rsrp_dbm;
    std::optional<double> ds_ns;
    std::size_t n_paths = 0;
    CellMask mask = CellMask::None;
    std::string note;

    bool operator==(const CoverageCell&) const = default;
};

struct CoverageGrid {
    GridSpec spec;
    int nx = 0, ny = 0;
    double tx_power_dbm = 0.0;
    double f_hz = 0.0;
    Vec3 tx;
    std::vector<CoverageCell> cells;  // row-major, y outer

    double covered_fraction() const;
};

struct CoverageOptions {
    int threads = 1;
    double time_s = 0.0;
    PathLossMode mode = PathLossMode::Incoherent;
    AntennaPattern rx_antenna;
    std::function<void(double)> progress;   // fraction of cells finished
    const std::atomic<bool>* cancel = nullptr;
};

CoverageGrid coverage(const Scene& scene, const Terminal& tx, const GridSpec& grid, double f_hz,
                      const EngineConfig& cfg, const MaterialLibrary& lib, const CoverageOptions& options = {});

std::string coverage_csv(const CoverageGrid& grid);
std::string coverage_json(const CoverageGrid& grid);

}  // namespace chantwin
