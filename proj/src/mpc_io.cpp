#include "chantwin/mpc_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chantwin/errors.hpp"

namespace chantwin {

using nlohmann::json;

std::string mpc_json(const ChannelRealization& r, int indent) {
    json doc;
    doc["schema_version"] = kMpcSchemaVersion;
    doc["frequency_hz"] = r.f_hz;
    doc["tx"] = {r.tx.x, r.tx.y, r.tx.z};
    doc["rx"] = {r.rx.x, r.rx.y, r.rx.z};
    doc["time_s"] = r.time_s;
    json mpcs = json::array();
    for (const auto& p : r.paths) {
        json sig = json::array();
        for (const auto& it : p.interactions) sig.push_back({std::string(1, kind_letter(it.kind)), it.surface_id});
        mpcs.push_back({{"delay_s", p.delay},
                        {"power_db", 10.0 * std::log10(std::norm(p.amplitude))},
                        {"phase_rad", std::arg(p.amplitude)},
                        {"aod_az_deg", p.aod.azimuth_deg},
                        {"aod_el_deg", p.aod.elevation_deg},
                        {"aoa_az_deg", p.aoa.azimuth_deg},
                        {"aoa_el_deg", p.aoa.elevation_deg},
                        {"doppler_hz", p.doppler_hz},
                        {"signature", std::move(sig)}});
    }
    doc["mpcs"] = std::move(mpcs);
    return doc.dump(indent);
}

ChannelRealization parse_mpc_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("MPC file: ") + e.what());
    }
    try {
        if (!doc.is_object() || !doc.contains("mpcs")) throw ParseError("MPC file: missing 'mpcs'");
        if (doc.value("schema_version", 0) != kMpcSchemaVersion) throw ParseError("MPC file: unsupported schema_version");
        ChannelRealization r;
        r.f_hz = doc.at("frequency_hz").get<double>();
        const auto tx = doc.at("tx").get<std::array<double, 3>>();
        const auto rx = doc.at("rx").get<std::array<double, 3>>();
        r.tx = {tx[0], tx[1], tx[2]};
        r.rx = {rx[0], rx[1], rx[2]};
        r.time_s = doc.value("time_s", 0.0);
        for (const auto& m : doc.at("mpcs")) {
            PropagationPath p;
            p.tx = r.tx;
            p.rx = r.rx;
            p.delay = m.at("delay_s").get<double>();
            p.path_length = p.delay * kSpeedOfLight;
            p.amplitude = std::polar(std::pow(10.0, m.at("power_db").get<double>() / 20.0), m.at("phase_rad").get<double>());
            p.aod = {m.at("aod_az_deg").get<double>(), m.at("aod_el_deg").get<double>()};
            p.aoa = {m.at("aoa_az_deg").get<double>(), m.at("aoa_el_deg").get<double>()};
            p.departure_dir = direction_from_angles(p.aod.azimuth_deg, p.aod.elevation_deg);
            p.arrival_dir = direction_from_angles(p.aoa.azimuth_deg, p.aoa.elevation_deg);
            p.doppler_hz = m.value("doppler_hz", 0.0);
            for (const auto& e : m.at("signature")) {
                const auto kind = e.at(0).get<std::string>();
                if (kind.size() != 1) throw ParseError("MPC file: bad interaction kind '" + kind + "'");
                Interaction it;
                it.kind = kind_from_letter(kind[0]);
                it.surface_id = e.at(1).get<std::uint32_t>();
                p.interactions.push_back(it);
            }
            r.paths.push_back(std::move(p));
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("MPC file: ") + e.what());
    }
}

ChannelRealization load_mpc_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open MPC file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mpc_json(buf.str());
}

}  // namespace chantwin
