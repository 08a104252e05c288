#include "chantwin/materials.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"

namespace chantwin {

using nlohmann::json;

namespace {

double interpolate_log_linear(const FrequencyTable& table, double f_hz) {
    if (f_hz <= table.front().first) return table.front().second;
    if (f_hz >= table.back().first) return table.back().second;
    auto upper = std::lower_bound(table.begin(), table.end(), f_hz,
                                  [](const auto& entry, double f) { return entry.first < f; });
    auto lower = upper - 1;
    const double w = (std::log(f_hz) - std::log(lower->first)) /
                     (std::log(upper->first) - std::log(lower->first));
    return lower->second + w * (upper->second - lower->second);
}

void check_table(const FrequencyTable& table, const std::string& what) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!(table[i].first > 0.0) || !std::isfinite(table[i].second))
            throw ValidationError(what + ": frequencies must be positive and values finite");
        if (i > 0 && !(table[i].first > table[i - 1].first))
            throw ValidationError(what + ": frequencies must be strictly increasing");
    }
}

// ITU-R P.2040 style power laws: eps = a f^b, sigma = c f^d with f in GHz.
Material itu_material(std::string name, double a, double b, double c, double d, double thickness,
                      double scatter_s, int lobe_alpha) {
    static constexpr double kGridGhz[] = {1, 2, 4, 6, 10, 15, 20, 30, 60, 100};
    Material m;
    m.name = std::move(name);
    m.eps_r = a * std::pow(6.0, b);
    m.sigma = c * std::pow(6.0, d);
    m.thickness = thickness;
    m.scatter_s = scatter_s;
    m.lobe_alpha = lobe_alpha;
    for (double f : kGridGhz) {
        if (b != 0.0) m.eps_r_table.emplace_back(f * 1e9, a * std::pow(f, b));
        m.sigma_table.emplace_back(f * 1e9, c * std::pow(f, d));
    }
    return m;
}

FrequencyTable parse_table(const json& j, const std::string& what) {
    if (!j.is_array()) throw ParseError(what + " must be an array of [f_hz, value]");
    FrequencyTable table;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
            throw ParseError(what + " rows must be [f_hz, value]");
        table.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    return table;
}

json table_to_json(const FrequencyTable& table) {
    json out = json::array();
    for (const auto& [f, v] : table) out.push_back({f, v});
    return out;
}

double number_field(const json& obj, const char* key) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError(std::string("material field '") + key + "' must be a number");
    return v.get<double>();
}

}  // namespace

double Material::eps_r_at(double f_hz) const {
    return eps_r_table.empty() ? eps_r : interpolate_log_linear(eps_r_table, f_hz);
}

double Material::sigma_at(double f_hz) const {
    return sigma_table.empty() ? sigma : interpolate_log_linear(sigma_table, f_hz);
}

void validate_material(const Material& m) {
    const std::string who = "material '" + m.name + "'";
    if (!(m.eps_r >= 1.0)) throw ValidationError(who + ": eps_r must be >= 1");
    if (!(m.sigma >= 0.0)) throw ValidationError(who + ": sigma must be >= 0");
    if (!(m.thickness > 0.0)) throw ValidationError(who + ": thickness must be > 0");
    if (!(m.scatter_s >= 0.0 && m.scatter_s <= 1.0))
        throw ValidationError(who + ": scatter_s must lie in [0, 1]");
    if (m.lobe_alpha < 1) throw ValidationError(who + ": lobe_alpha must be a positive integer");
    check_table(m.eps_r_table, who + " eps_r_table");
    check_table(m.sigma_table, who + " sigma_table");
    for (const auto& [f, v] : m.eps_r_table)
        if (v < 1.0) throw ValidationError(who + ": eps_r_table values must be >= 1");
    for (const auto& [f, v] : m.sigma_table)
        if (v < 0.0) throw ValidationError(who + ": sigma_table values must be >= 0");
}

MaterialLibrary::MaterialLibrary(std::vector<Material> materials) : materials_(std::move(materials)) {
    std::set<std::string> names;
    for (const auto& m : materials_) {
        validate_material(m);
        if (!names.insert(m.name).second)
            throw ValidationError("duplicate material name '" + m.name + "'");
    }
}

std::optional<std::size_t> MaterialLibrary::find(const std::string& name) const {
    for (std::size_t i = 0; i < materials_.size(); ++i)
        if (materials_[i].name == name) return i;
    return std::nullopt;
}

MaterialLibrary default_material_library() {
    return MaterialLibrary({
        itu_material("concrete", 5.24, 0.0, 0.0462, 0.7822, 0.25, 0.2, 4),
        itu_material("brick", 3.91, 0.0, 0.0238, 0.16, 0.20, 0.25, 4),
        itu_material("glass", 6.31, 0.0, 0.0036, 1.3394, 0.01, 0.0, 4),
        itu_material("wood", 1.99, 0.0, 0.0047, 1.0718, 0.04, 0.2, 4),
        [] {
            Material metal;
            metal.name = "metal";
            metal.eps_r = 1.0;
            metal.sigma = 1e7;
            metal.thickness = 0.005;
            return metal;
        }(),
        itu_material("ground", 15.0, -0.1, 0.035, 1.63, 1.0, 0.0, 4),
    });
}

MaterialLibrary parse_material_library(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("material library: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("materials") || !doc["materials"].is_array())
        throw ParseError("material library: expected an object with a 'materials' array");
    for (const auto& [key, _] : doc.items())
        if (key != "materials" && key != "schema_version")
            throw ParseError("material library: unknown key '" + key + "'");

    static const std::set<std::string> kKeys = {"name",      "eps_r",      "sigma",
                                                "thickness_m", "scatter_s", "lobe_alpha",
                                                "eps_r_table", "sigma_table"};
    std::vector<Material> out;
    for (const auto& entry : doc["materials"]) {
        if (!entry.is_object()) throw ParseError("material library: entries must be objects");
        for (const auto& [key, _] : entry.items())
            if (!kKeys.count(key)) throw ParseError("material library: unknown key '" + key + "'");
        try {
            Material m;
            m.name = entry.at("name").get<std::string>();
            m.eps_r = number_field(entry, "eps_r");
            m.sigma = number_field(entry, "sigma");
            m.thickness = number_field(entry, "thickness_m");
            m.scatter_s = entry.contains("scatter_s") ? number_field(entry, "scatter_s") : 0.0;
            m.lobe_alpha = entry.contains("lobe_alpha") ? entry["lobe_alpha"].get<int>() : 4;
            if (entry.contains("eps_r_table"))
                m.eps_r_table = parse_table(entry["eps_r_table"], "eps_r_table");
            if (entry.contains("sigma_table"))
                m.sigma_table = parse_table(entry["sigma_table"], "sigma_table");
            out.push_back(std::move(m));
        } catch (const json::exception& e) {
            throw ParseError(std::string("material library: ") + e.what());
        }
    }
    return MaterialLibrary(std::move(out));
}

MaterialLibrary load_material_library(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open material library " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_material_library(buf.str());
}

std::string material_library_to_json(const MaterialLibrary& lib) {
    json doc;
    doc["schema_version"] = 1;
    doc["materials"] = json::array();
    for (const auto& m : lib.materials()) {
        json e = {{"name", m.name},           {"eps_r", m.eps_r},         {"sigma", m.sigma},
                  {"thickness_m", m.thickness}, {"scatter_s", m.scatter_s}, {"lobe_alpha", m.lobe_alpha}};
        if (!m.eps_r_table.empty()) e["eps_r_table"] = table_to_json(m.eps_r_table);
        if (!m.sigma_table.empty()) e["sigma_table"] = table_to_json(m.sigma_table);
        doc["materials"].push_back(std::move(e));
    }
    return doc.dump(2);
}

MaterialLibrary material_library_from_environment() {
    if (const char* dir = std::getenv("MART_DATA_DIR")) {
        const auto path = std::filesystem::path(dir) / "materials.json";
        if (std::filesystem::exists(path)) return load_material_library(path);
    }
    return default_material_library();
}

Complex complex_permittivity(const Material& m, double f_hz) {
    return {m.eps_r_at(f_hz), -m.sigma_at(f_hz) / (2.0 * kPi * f_hz * kEpsilon0)};
}

FresnelPair fresnel_coefficients(Complex eps, double cos_incidence) {
    const double c = std::clamp(cos_incidence, 0.0, 1.0);
    const double sin2 = 1.0 - c * c;
    const Complex root = std::sqrt(eps - sin2);
    return {(c - root) / (c + root), (eps * c - root) / (eps * c + root)};
}

FresnelPair fresnel_coefficients(const Material& m, double cos_incidence, double f_hz) {
    return fresnel_coefficients(complex_permittivity(m, f_hz), cos_incidence);
}

std::pair<double, double> half_space_power_transmittance(Complex eps, double cos_incidence) {
    const double c = std::clamp(cos_incidence, 0.0, 1.0);
    if (c == 0.0) return {0.0, 0.0};
    const Complex root = std::sqrt(eps - (1.0 - c * c));
    const Complex t_perp = 2.0 * c / (c + root);
    const Complex t_par = 2.0 * std::sqrt(eps) * c / (eps * c + root);
    // Re(n2 cos theta_t) / cos theta_i |t|^2; exact for lossless media.
    const double p_perp = root.real() / c * std::norm(t_perp);
    const double p_par = root.real() / c * std::norm(t_par);
    return {p_perp, p_par};
}

FresnelPair slab_transmission(const Material& m, double cos_incidence, double f_hz) {
    const double c = std::clamp(cos_incidence, 0.0, 1.0);
    const Complex eps = complex_permittivity(m, f_hz);
    const Complex root = std::sqrt(eps - (1.0 - c * c));
    const double k0 = 2.0 * kPi * f_hz / kSpeedOfLight;
    const Complex j(0.0, 1.0);
    const Complex phase = std::exp(-j * k0 * m.thickness * root);
    const Complex phase2 = phase * phase;
    const FresnelPair r = fresnel_coefficients(eps, c);
    auto through = [&](Complex gamma) {
        return (1.0 - gamma * gamma) * phase / (1.0 - gamma * gamma * phase2);
    };
    return {through(r.perp), through(r.par)};
}

double lobe_hemisphere_integral(int lobe_alpha) {
    static std::mutex mu;
    static std::map<int, double> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(lobe_alpha); it != cache.end()) return it->second;
    // Composite Simpson over psi in [0, pi/2], azimuthally symmetric.
    constexpr int kIntervals = 4096;
    const double h = (kPi / 2.0) / kIntervals;
    double sum = 0.0;
    for (int i = 0; i <= kIntervals; ++i) {
        const double psi = i * h;
        const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * std::pow((1.0 + std::cos(psi)) / 2.0, lobe_alpha) * std::sin(psi);
    }
    const double value = 2.0 * kPi * sum * h / 3.0;
    cache.emplace(lobe_alpha, value);
    return value;
}

double scattering_amplitude(const Material& m, const Vec3& incident_dir, const Vec3& scattered_dir,
                            const Vec3& normal) {
    if (m.scatter_s == 0.0) return 0.0;
    const Vec3 n = dot(incident_dir, normal) > 0.0 ? -normal : normal;
    const Vec3 specular = reflect_direction(incident_dir, n);
    const double cos_psi = std::clamp(dot(specular, scattered_dir), -1.0, 1.0);
    const double lobe = std::pow((1.0 + cos_psi) / 2.0, 0.5 * m.lobe_alpha);
    return m.scatter_s * lobe / std::sqrt(lobe_hemisphere_integral(m.lobe_alpha));
}

}  // namespace chantwin
