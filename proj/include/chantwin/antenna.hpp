#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chantwin/geometry.hpp"

namespace chantwin {

enum class AntennaKind { Isotropic, VerticalDipole, Grid };

/// Far-field pattern as complex (g_theta, g_phi) amplitudes; |g|^2 is linear power gain.
struct AntennaPattern {
    AntennaKind kind = AntennaKind::Isotropic;
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;

    // Grid lattice: azimuth [0, 360) with az_count nodes, elevation [-90, 90] inclusive.
    int az_count = 0;
    int el_count = 0;
    std::vector<std::pair<Complex, Complex>> samples;  // el-major: samples[el * az_count + az]

    double az_step() const { return 360.0 / az_count; }
    double el_step() const { return 180.0 / (el_count - 1); }

    static AntennaPattern isotropic() { return {}; }
    static AntennaPattern vertical_dipole() {
        AntennaPattern a;
        a.kind = AntennaKind::VerticalDipole;
        return a;
    }

    bool operator==(const AntennaPattern&) const = default;
};

struct PolarizedGain {
    Complex theta;
    Complex phi;
};

/// Pattern value along a global direction, expressed in the global spherical basis.
PolarizedGain gain_at(const AntennaPattern& a, const Vec3& direction, double f_hz);

void validate_pattern(const AntennaPattern& a);
AntennaPattern parse_pattern(const std::string& json_text);
AntennaPattern load_pattern(const std::filesystem::path& path);
std::string pattern_to_json(const AntennaPattern& a);
void save_pattern(const AntennaPattern& a, const std::filesystem::path& path);

/// Resolve "isotropic", "dipole", a pattern in $MART_DATA_DIR/antennas/<name>.json, or a file path.
AntennaPattern antenna_from_spec(const std::string& spec);

}  // namespace chantwin
