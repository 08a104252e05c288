#include "chantwin/antenna.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"

namespace chantwin {

using nlohmann::json;

namespace {

// Half-wave dipole directivity, 2.15 dBi.
constexpr double kDipoleDirectivity = 1.64085;

struct Rotation {
    std::array<Vec3, 3> cols;  // local x, y, z axes in global coordinates

    Vec3 to_global(const Vec3& l) const { return cols[0] * l.x + cols[1] * l.y + cols[2] * l.z; }
    Vec3 to_local(const Vec3& g) const { return {dot(cols[0], g), dot(cols[1], g), dot(cols[2], g)}; }
};

// Yaw about z, then positive pitch raises the boresight (+x) towards +z.
Rotation orientation(double yaw_deg, double pitch_deg) {
    const double y = yaw_deg * kPi / 180.0, p = pitch_deg * kPi / 180.0;
    const double cy = std::cos(y), sy = std::sin(y), cp = std::cos(p), sp = std::sin(p);
    return {{Vec3{cy * cp, sy * cp, sp}, Vec3{-sy, cy, 0.0}, Vec3{-cy * sp, -sy * sp, cp}}};
}

PolarizedGain grid_lookup(const AntennaPattern& a, const Vec3& local_dir) {
    const Angles ang = direction_angles(local_dir);
    double az = std::fmod(ang.azimuth_deg, 360.0);
    if (az < 0.0) az += 360.0;
    const double fa = az / a.az_step();
    const double fe = std::clamp((ang.elevation_deg + 90.0) / a.el_step(), 0.0, a.el_count - 1.0);
    const int ia = static_cast<int>(std::floor(fa)) % a.az_count;
    const int ie = std::min(static_cast<int>(std::floor(fe)), a.el_count - 2);
    const double wa = fa - std::floor(fa);
    const double we = fe - ie;
    const int ia1 = (ia + 1) % a.az_count;
    auto at = [&](int e, int z) { return a.samples[static_cast<std::size_t>(e) * a.az_count + z]; };
    auto mix = [&](auto pick) {
        return (1 - we) * ((1 - wa) * pick(at(ie, ia)) + wa * pick(at(ie, ia1))) +
               we * ((1 - wa) * pick(at(ie + 1, ia)) + wa * pick(at(ie + 1, ia1)));
    };
    return {mix([](const auto& s) { return s.first; }), mix([](const auto& s) { return s.second; })};
}

}  // namespace

PolarizedGain gain_at(const AntennaPattern& a, const Vec3& direction, double /*f_hz*/) {
    if (a.kind == AntennaKind::Isotropic) return {1.0, 0.0};
    const Rotation rot = orientation(a.yaw_deg, a.pitch_deg);
    const Vec3 local = rot.to_local(direction);

    PolarizedGain local_gain;
    if (a.kind == AntennaKind::VerticalDipole) {
        const double ct = std::clamp(local.z, -1.0, 1.0);
        const double st = std::sqrt(1.0 - ct * ct);
        local_gain.theta = st < 1e-9 ? 0.0 : std::sqrt(kDipoleDirectivity) * std::cos(kPi / 2.0 * ct) / st;
    } else {
        local_gain = grid_lookup(a, local);
    }

    const auto local_basis = spherical_basis(local);
    const auto global_basis = spherical_basis(direction);
    const Vec3 th = rot.to_global(local_basis[0]);
    const Vec3 ph = rot.to_global(local_basis[1]);
    return {local_gain.theta * dot(th, global_basis[0]) + local_gain.phi * dot(ph, global_basis[0]),
            local_gain.theta * dot(th, global_basis[1]) + local_gain.phi * dot(ph, global_basis[1])};
}

void validate_pattern(const AntennaPattern& a) {
    if (a.kind != AntennaKind::Grid) return;
    if (a.az_count < 2 || a.el_count < 2) throw ValidationError("antenna grid: lattice too small");
    if (a.samples.size() != static_cast<std::size_t>(a.az_count) * a.el_count)
        throw ValidationError("antenna grid: sample count does not match lattice");
    for (const auto& [t, p] : a.samples)
        if (!std::isfinite(t.real()) || !std::isfinite(t.imag()) || !std::isfinite(p.real()) ||
            !std::isfinite(p.imag()))
            throw ValidationError("antenna grid: non-finite sample");
}

AntennaPattern parse_pattern(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("antenna pattern: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("antenna pattern: expected an object");
    for (const auto& [key, _] : doc.items())
        if (key != "schema_version" && key != "kind" && key != "yaw_deg" && key != "pitch_deg" &&
            key != "azimuth_deg" && key != "elevation_deg" && key != "samples")
            throw ParseError("antenna pattern: unknown key '" + key + "'");
    try {
        AntennaPattern a;
        const std::string kind = doc.value("kind", std::string("grid"));
        a.yaw_deg = doc.value("yaw_deg", 0.0);
        a.pitch_deg = doc.value("pitch_deg", 0.0);
        if (kind == "isotropic") return a;
        if (kind == "vertical_dipole") {
            a.kind = AntennaKind::VerticalDipole;
            return a;
        }
        if (kind != "grid") throw ParseError("antenna pattern: unknown kind '" + kind + "'");
        a.kind = AntennaKind::Grid;
        const auto az = doc.at("azimuth_deg").get<std::vector<double>>();
        const auto el = doc.at("elevation_deg").get<std::vector<double>>();
        if (az.size() < 2 || el.size() < 2) throw ValidationError("antenna grid: lattice too small");
        const double az_step = 360.0 / az.size();
        for (std::size_t i = 0; i < az.size(); ++i)
            if (std::fabs(az[i] - i * az_step) > 1e-6)
                throw ValidationError("antenna grid: azimuth must cover [0, 360) on a regular lattice");
        const double el_step = 180.0 / (el.size() - 1);
        for (std::size_t i = 0; i < el.size(); ++i)
            if (std::fabs(el[i] - (-90.0 + i * el_step)) > 1e-6)
                throw ValidationError("antenna grid: elevation must span -90..90 including both poles");
        a.az_count = static_cast<int>(az.size());
        a.el_count = static_cast<int>(el.size());
        const auto& rows = doc.at("samples");
        if (!rows.is_array() || rows.size() != el.size())
            throw ValidationError("antenna grid: samples must have one row per elevation");
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != az.size())
                throw ValidationError("antenna grid: each row needs one sample per azimuth");
            for (const auto& s : row) {
                const auto v = s.get<std::vector<double>>();
                if (v.size() != 4) throw ParseError("antenna grid: samples are [re_t, im_t, re_p, im_p]");
                a.samples.emplace_back(Complex(v[0], v[1]), Complex(v[2], v[3]));
            }
        }
        validate_pattern(a);
        return a;
    } catch (const json::exception& e) {
        throw ParseError(std::string("antenna pattern: ") + e.what());
    }
}

AntennaPattern load_pattern(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open antenna pattern " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_pattern(buf.str());
}

std::string pattern_to_json(const AntennaPattern& a) {
    json doc;
    doc["schema_version"] = 1;
    doc["yaw_deg"] = a.yaw_deg;
    doc["pitch_deg"] = a.pitch_deg;
    switch (a.kind) {
        case AntennaKind::Isotropic: doc["kind"] = "isotropic"; return doc.dump();
        case AntennaKind::VerticalDipole: doc["kind"] = "vertical_dipole"; return doc.dump();
        case AntennaKind::Grid: break;
    }
    doc["kind"] = "grid";
    json az = json::array(), el = json::array(), rows = json::array();
    for (int i = 0; i < a.az_count; ++i) az.push_back(i * a.az_step());
    for (int i = 0; i < a.el_count; ++i) el.push_back(-90.0 + i * a.el_step());
    for (int e = 0; e < a.el_count; ++e) {
        json row = json::array();
        for (int z = 0; z < a.az_count; ++z) {
            const auto& [t, p] = a.samples[static_cast<std::size_t>(e) * a.az_count + z];
            row.push_back({t.real(), t.imag(), p.real(), p.imag()});
        }
        rows.push_back(std::move(row));
    }
    doc["azimuth_deg"] = std::move(az);
    doc["elevation_deg"] = std::move(el);
    doc["samples"] = std::move(rows);
    return doc.dump();
}

void save_pattern(const AntennaPattern& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write antenna pattern " + path.string());
    out << pattern_to_json(a);
}

AntennaPattern antenna_from_spec(const std::string& spec) {
    if (spec.empty() || spec == "isotropic") return AntennaPattern::isotropic();
    if (spec == "dipole" || spec == "vertical_dipole") return AntennaPattern::vertical_dipole();
    if (const char* dir = std::getenv("MART_DATA_DIR"); dir && spec.find('/') == std::string::npos) {
        const auto path = std::filesystem::path(dir) / "antennas" / (spec + ".json");
        if (std::filesystem::exists(path)) return load_pattern(path);
    }
    return load_pattern(spec);
}

}  // namespace chantwin
