#include "chantwin/channel.hpp"

#include <algorithm>
#include <tuple>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"
#include "chantwin/parallel.hpp"

namespace chantwin {

using nlohmann::json;

namespace {

double total_power(const ChannelRealization& r) {
    double p = 0.0;
    for (const auto& path : r.paths) p += std::norm(path.amplitude);
    return p;
}

double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::optional<double> path_loss(const ChannelRealization& r, PathLossMode mode) {
    if (r.paths.empty()) return std::nullopt;
    double p = 0.0;
    if (mode == PathLossMode::Incoherent) {
        p = total_power(r);
    } else {
        Complex sum = 0.0;
        for (const auto& path : r.paths) sum += path.amplitude;
        p = std::norm(sum);
    }
    if (!(p > 0.0)) return std::nullopt;
    return -10.0 * std::log10(p);
}

std::optional<double> rsrp(const ChannelRealization& r, double tx_power_dbm, PathLossMode mode) {
    const auto pl = path_loss(r, mode);
    if (!pl) return std::nullopt;
    return tx_power_dbm - *pl;
}

double rms_delay_spread(const ChannelRealization& r) {
    if (r.paths.size() < 2) return 0.0;
    // Moments about the first delay keep the subtraction well conditioned.
    const double t0 = r.paths.front().delay;
    double p = 0.0, m1 = 0.0;
    for (const auto& path : r.paths) {
        const double w = std::norm(path.amplitude);
        p += w;
        m1 += w * (path.delay - t0);
    }
    if (!(p > 0.0)) return 0.0;
    const double mean = m1 / p;
    double m2 = 0.0;
    for (const auto& path : r.paths) {
        const double d = path.delay - t0 - mean;
        m2 += std::norm(path.amplitude) * d * d;
    }
    return std::sqrt(m2 / p);
}

double angular_spread(const ChannelRealization& r, AngleSide side) {
    if (r.paths.size() < 2) return 0.0;
    double p = 0.0, c = 0.0, s = 0.0;
    for (const auto& path : r.paths) {
        const double w = std::norm(path.amplitude);
        const double az = (side == AngleSide::Arrival ? path.aoa : path.aod).azimuth_deg * kPi / 180.0;
        p += w;
        c += w * std::cos(az);
        s += w * std::sin(az);
    }
    if (!(p > 0.0)) return 0.0;
    const double resultant = std::min(1.0, std::hypot(c, s) / p);
    return std::sqrt(2.0 * (1.0 - resultant)) * 180.0 / kPi;
}

Cir synthesize_cir(const ChannelRealization& r, double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw ValidationError("bandwidth must be positive");
    Cir cir;
    cir.tap_spacing = 1.0 / bandwidth_hz;
    if (r.paths.empty()) return cir;
    double tmin = r.paths.front().delay, tmax = tmin;
    for (const auto& p : r.paths) {
        tmin = std::min(tmin, p.delay);
        tmax = std::max(tmax, p.delay);
    }
    cir.reference_delay = tmin - kCirPaddingTaps * cir.tap_spacing;
    const auto n = static_cast<std::size_t>(std::ceil((tmax - tmin) / cir.tap_spacing)) + 2 * kCirPaddingTaps + 1;
    cir.taps.assign(n, Complex(0.0, 0.0));
    for (const auto& p : r.paths) {
        const double x = (p.delay - cir.reference_delay) / cir.tap_spacing;
        for (std::size_t k = 0; k < n; ++k) cir.taps[k] += p.amplitude * sinc(static_cast<double>(k) - x);
    }
    return cir;
}

double angular_distance_deg(const Angles& a, const Angles& b) {
    const Vec3 u = direction_from_angles(a.azimuth_deg, a.elevation_deg);
    const Vec3 v = direction_from_angles(b.azimuth_deg, b.elevation_deg);
    return std::atan2(norm(cross(u, v)), dot(u, v)) * 180.0 / kPi;
}

double similarity_index(const ChannelRealization& a, const ChannelRealization& b, const SimilarityGates& gates) {
    const double pa = total_power(a), pb = total_power(b);
    const double denom = std::max(pa, pb);
    if (!(denom > 0.0)) return pa == pb ? 100.0 : 0.0;

    struct Pair {
        double lo, hi, dt, angle;
        std::size_t i, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < a.paths.size(); ++i)
        for (std::size_t j = 0; j < b.paths.size(); ++j) {
            const auto& x = a.paths[i];
            const auto& y = b.paths[j];
            const double dt = std::fabs(x.delay - y.delay);
            if (dt > gates.delay_gate_s) continue;
            const double aoa = angular_distance_deg(x.aoa, y.aoa);
            const double aod = angular_distance_deg(x.aod, y.aod);
            if (aoa > gates.angle_gate_deg || aod > gates.angle_gate_deg) continue;
            const double px = std::norm(x.amplitude), py = std::norm(y.amplitude);
            pairs.push_back({std::min(px, py), std::max(px, py), dt, aoa + aod, i, j});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) {
        if (l.lo != r.lo) return l.lo > r.lo;
        if (l.hi != r.hi) return l.hi > r.hi;
        if (l.dt != r.dt) return l.dt < r.dt;
        if (l.angle != r.angle) return l.angle < r.angle;
        return std::tie(l.i, l.j) < std::tie(r.i, r.j);
    });
    std::vector<char> used_a(a.paths.size(), 0), used_b(b.paths.size(), 0);
    double matched = 0.0;
    for (const auto& p : pairs) {
        if (used_a[p.i] || used_b[p.j]) continue;
        used_a[p.i] = used_b[p.j] = 1;
        matched += p.lo;
    }
    return std::clamp(100.0 * matched / denom, 0.0, 100.0);
}

int GridSpec::nx() const { return static_cast<int>(std::llround((xmax - xmin) / step)); }
int GridSpec::ny() const { return static_cast<int>(std::llround((ymax - ymin) / step)); }

void validate_grid(const GridSpec& g) {
    for (double v : {g.xmin, g.ymin, g.xmax, g.ymax, g.step, g.height})
        if (!std::isfinite(v)) throw ValidationError("grid: values must be finite");
    if (!(g.step > 0.0)) throw ValidationError("grid: step must be positive");
    if (!(g.xmax > g.xmin) || !(g.ymax > g.ymin)) throw ValidationError("grid: max must exceed min");
    if (g.nx() < 1 || g.ny() < 1) throw ValidationError("grid: at least one cell per axis");
    if (static_cast<long long>(g.nx()) * g.ny() > 25'000'000) throw ValidationError("grid: too many cells");
}

GridSpec parse_grid_spec(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParseError("grid: '" + item + "' is not a number");
        }
    }
    if (v.size() != 5 && v.size() != 6) throw ParseError("grid: expected xmin,ymin,xmax,ymax,step[,height]");
    GridSpec g{v[0], v[1], v[2], v[3], v[4], v.size() == 6 ? v[5] : 1.5};
    validate_grid(g);
    return g;
}

const char* mask_name(CellMask m) {
    switch (m) {
        case CellMask::None: return "";
        case CellMask::InsideGeometry: return "inside_geometry";
        case CellMask::NoCoverage: return "no_coverage";
        case CellMask::Error: return "error";
    }
    return "";
}

double CoverageGrid::covered_fraction() const {
    if (cells.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) n += c.mask == CellMask::None;
    return static_cast<double>(n) / static_cast<double>(cells.size());
}

CoverageGrid coverage(const Scene& scene, const Terminal& tx, const GridSpec& grid, double f_hz,
                      const EngineConfig& cfg, const MaterialLibrary& lib, const CoverageOptions& options) {
    validate_grid(grid);
    validate_config(cfg);
    if (!(f_hz > 0.0)) throw ValidationError("frequency must be positive");
    CoverageGrid out;
    out.spec = grid;
    out.nx = grid.nx();
    out.ny = grid.ny();
    out.tx_power_dbm = tx.power_dbm;
    out.f_hz = f_hz;
    out.tx = tx.world_position(scene, options.time_s);

    auto snap = std::make_shared<const SceneSnapshot>(make_snapshot(scene, options.time_s, cfg));
    out.cells.resize(static_cast<std::size_t>(out.nx) * out.ny);
    std::vector<Vec3> receivers;
    std::vector<std::size_t> receiver_cell;
    for (int iy = 0; iy < out.ny; ++iy)
        for (int ix = 0; ix < out.nx; ++ix) {
            const auto idx = static_cast<std::size_t>(iy) * out.nx + ix;
            auto& cell = out.cells[idx];
            cell.position = {grid.xmin + (ix + 0.5) * grid.step, grid.ymin + (iy + 0.5) * grid.step, grid.height};
            if (point_inside_geometry(snap->bvh, snap->posed, cell.position)) {
                cell.mask = CellMask::InsideGeometry;
                continue;
            }
            receivers.push_back(cell.position);
            receiver_cell.push_back(idx);
        }

    LinkContext ctx(snap, out.tx, cfg, lib, f_hz, LinkOptions{options.threads, {}});
    ctx.prepare_receivers(receivers);
    if (options.progress) options.progress(0.0);

    std::atomic<std::size_t> finished{0};
    // Links inside the context run single-threaded; cells are the unit of parallelism.
    LinkContext* shared = &ctx;
    parallel_for(receivers.size(), options.threads, [&](std::size_t k) {
        auto& cell = out.cells[receiver_cell[k]];
        if (options.cancel && options.cancel->load()) {
            cell.mask = CellMask::Error;
            cell.note = "cancelled";
            return;
        }
        try {
            const auto r = evaluate_link(shared->geometry_for_prepared(k), lib, tx.antenna, options.rx_antenna,
                                         cfg.rel_power_floor_db);
            cell.pl_db = path_loss(r, options.mode);
            if (!cell.pl_db) {
                cell.mask = CellMask::NoCoverage;
            } else {
                cell.rsrp_dbm = tx.power_dbm - *cell.pl_db;
                cell.ds_ns = rms_delay_spread(r) * 1e9;
                cell.n_paths = r.paths.size();
            }
        } catch (const std::exception& e) {
            cell = CoverageCell{cell.position, std::nullopt, std::nullopt, std::nullopt, 0, CellMask::Error, e.what()};
        }
        const auto done = ++finished;
        if (options.progress) options.progress(static_cast<double>(done) / static_cast<double>(receivers.size()));
    });
    if (options.progress) options.progress(1.0);
    return out;
}

namespace {

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

}  // namespace

std::string coverage_csv(const CoverageGrid& grid) {
    std::string s = "x_m,y_m,z_m,pl_db,rsrp_dbm,ds_ns,n_paths,masked\n";
    for (const auto& c : grid.cells) {
        const bool masked = c.mask != CellMask::None;
        s += fmt(c.position.x) + "," + fmt(c.position.y) + "," + fmt(c.position.z) + "," + fmt(c.pl_db) + "," +
             fmt(c.rsrp_dbm) + "," + fmt(c.ds_ns) + "," + (masked ? std::string() : std::to_string(c.n_paths)) + "," +
             (masked ? "1" : "0") + "\n";
    }
    return s;
}

std::string coverage_json(const CoverageGrid& grid) {
    json doc;
    doc["schema_version"] = 1;
    doc["grid"] = {{"xmin", grid.spec.xmin}, {"ymin", grid.spec.ymin}, {"xmax", grid.spec.xmax},
                   {"ymax", grid.spec.ymax}, {"step", grid.spec.step},  {"height", grid.spec.height}};
    doc["nx"] = grid.nx;
    doc["ny"] = grid.ny;
    doc["tx"] = {grid.tx.x, grid.tx.y, grid.tx.z};
    doc["tx_power_dbm"] = grid.tx_power_dbm;
    doc["freq_hz"] = grid.f_hz;
    doc["covered_percent"] = 100.0 * grid.covered_fraction();
    json cells = json::array();
    for (const auto& c : grid.cells) {
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        cells.push_back({{"x_m", c.position.x},
                         {"y_m", c.position.y},
                         {"z_m", c.position.z},
                         {"pl_db", opt(c.pl_db)},
                         {"rsrp_dbm", opt(c.rsrp_dbm)},
                         {"ds_ns", opt(c.ds_ns)},
                         {"n_paths", c.n_paths},
                         {"masked", c.mask != CellMask::None},
                         {"reason", mask_name(c.mask)}});
    }
    doc["cells"] = std::move(cells);
    return doc.dump();
}

}  // namespace chantwin
