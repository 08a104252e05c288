#include "chantwin/profiles.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"

namespace chantwin {

using nlohmann::json;

std::vector<std::string> enabled_mechanisms(const EngineConfig& c) {
    std::vector<std::string> m;
    if (c.max_reflections > 0) m.emplace_back("reflection");
    if (c.max_transmissions > 0) m.emplace_back("transmission");
    if (c.max_diffractions > 0) m.emplace_back("diffraction");
    if (c.max_scatterings > 0) m.emplace_back("scattering");
    return m;
}

std::vector<std::string> builtin_profile_names() { return {"offline", "online", "custom"}; }

TaskProfile builtin_profile(const std::string& name) {
    TaskProfile p;
    p.name = name;
    EngineConfig& e = p.engine;
    if (name == "offline") {
        e.n_rays = 1u << 20;
        e.max_order = 4;
        e.max_reflections = 4;
        e.max_transmissions = 2;
        e.max_diffractions = 1;
        e.max_scatterings = 1;
        e.rel_power_floor_db = -40.0;
        e.bidirectional = false;
        e.image_method = true;
        e.image_method_order = 2;
        e.diffraction_reflections = 1;
        p.grid_step_default = 1.0;
        p.latency_budget_s = 10.0;
    } else if (name == "online" || name == "custom") {
        e.n_rays = 1u << 14;
        e.max_order = 3;
        e.max_reflections = 3;
        e.max_transmissions = 1;
        e.max_diffractions = 1;
        e.max_scatterings = 0;
        e.rel_power_floor_db = -25.0;
        e.bidirectional = true;
        e.image_method = false;
        e.diffraction_reflections = 0;
        p.grid_step_default = 5.0;
        p.latency_budget_s = 0.1;
    } else {
        std::string names;
        for (const auto& n : builtin_profile_names()) names += (names.empty() ? "" : ", ") + n;
        throw ValidationError("unknown profile '" + name + "' (valid: " + names + ")");
    }
    p.mechanisms = enabled_mechanisms(e);
    return p;
}

EngineConfig resolve_profile(const TaskProfile& profile, const ProfileOverrides& o) {
    EngineConfig c = profile.engine;
    if (o.n_rays) c.n_rays = *o.n_rays;
    if (o.max_order) c.max_order = *o.max_order;
    if (o.max_reflections) c.max_reflections = *o.max_reflections;
    if (o.max_transmissions) c.max_transmissions = *o.max_transmissions;
    if (o.max_diffractions) c.max_diffractions = *o.max_diffractions;
    if (o.max_scatterings) c.max_scatterings = *o.max_scatterings;
    if (o.rel_power_floor_db) c.rel_power_floor_db = *o.rel_power_floor_db;
    if (o.rx_sphere_scale) c.rx_sphere_scale = *o.rx_sphere_scale;
    if (o.seed) c.seed = *o.seed;
    if (o.bidirectional) c.bidirectional = *o.bidirectional;
    if (o.image_method) c.image_method = *o.image_method;
    if (o.image_method_order) c.image_method_order = *o.image_method_order;
    if (o.diffraction_reflections) c.diffraction_reflections = *o.diffraction_reflections;
    if (o.scatter_tile_m) c.scatter_tile_m = *o.scatter_tile_m;

    if (profile.name != "custom") {
        const EngineConfig& p = profile.engine;
        auto check = [&](int value, int bound, const char* field) {
            if (value > bound)
                throw ValidationError("profile '" + profile.name + "': " + field + " " + std::to_string(value) +
                                      " exceeds the preset bound " + std::to_string(bound) +
                                      "; use the custom profile");
        };
        check(c.max_order, p.max_order, "max_order");
        check(c.max_reflections, p.max_reflections, "max_reflections");
        check(c.max_transmissions, p.max_transmissions, "max_transmissions");
        check(c.max_diffractions, p.max_diffractions, "max_diffractions");
        check(c.max_scatterings, p.max_scatterings, "max_scatterings");
    }
    validate_config(c);
    return c;
}

ProfileOverrides parse_profile_overrides(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("profile file: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("profile file: expected an object");
    ProfileOverrides o;
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "schema_version") continue;
            if (key == "n_rays") o.n_rays = v.get<std::size_t>();
            else if (key == "max_order") o.max_order = v.get<int>();
            else if (key == "max_reflections") o.max_reflections = v.get<int>();
            else if (key == "max_transmissions") o.max_transmissions = v.get<int>();
            else if (key == "max_diffractions") o.max_diffractions = v.get<int>();
            else if (key == "max_scatterings") o.max_scatterings = v.get<int>();
            else if (key == "rel_power_floor_db") o.rel_power_floor_db = v.get<double>();
            else if (key == "rx_sphere_scale") o.rx_sphere_scale = v.get<double>();
            else if (key == "seed") o.seed = v.get<std::uint64_t>();
            else if (key == "bidirectional") o.bidirectional = v.get<bool>();
            else if (key == "image_method") o.image_method = v.get<bool>();
            else if (key == "image_method_order") o.image_method_order = v.get<int>();
            else if (key == "diffraction_reflections") o.diffraction_reflections = v.get<int>();
            else if (key == "scatter_tile_m") o.scatter_tile_m = v.get<double>();
            else throw ParseError("profile file: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("profile file: ") + e.what());
    }
    return o;
}

ProfileOverrides load_profile_overrides(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open profile file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_profile_overrides(buf.str());
}

}  // namespace chantwin
