#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chantwin/geometry.hpp"

namespace chantwin {

/// (frequency Hz, value) samples, strictly increasing in frequency.
using FrequencyTable = std::vector<std::pair<double, double>>;

struct Material {
    std::string name;
    double eps_r = 1.0;
    double sigma = 0.0;
    double thickness = 0.1;
    double scatter_s = 0.0;
    int lobe_alpha = 4;
    FrequencyTable eps_r_table;
    FrequencyTable sigma_table;

    double eps_r_at(double f_hz) const;
    double sigma_at(double f_hz) const;

    bool operator==(const Material&) const = default;
};

void validate_material(const Material& m);

class MaterialLibrary {
public:
    MaterialLibrary() = default;
    explicit MaterialLibrary(std::vector<Material> materials);

    std::size_t size() const { return materials_.size(); }
    const Material& at(std::size_t id) const { return materials_.at(id); }
    Material& mutable_at(std::size_t id) { return materials_.at(id); }
    std::optional<std::size_t> find(const std::string& name) const;
    const std::vector<Material>& materials() const { return materials_; }

    bool operator==(const MaterialLibrary&) const = default;

private:
    std::vector<Material> materials_;
};

/// ITU-style defaults: concrete, brick, glass, wood, metal, ground (ids 0..5).
MaterialLibrary default_material_library();

MaterialLibrary load_material_library(const std::filesystem::path& path);
MaterialLibrary parse_material_library(const std::string& json_text);
std::string material_library_to_json(const MaterialLibrary& lib);

/// Library from $MART_DATA_DIR/materials.json when present, built-in defaults otherwise.
MaterialLibrary material_library_from_environment();

/// eps_r(f) - j sigma(f) / (2 pi f eps0).
Complex complex_permittivity(const Material& m, double f_hz);

struct FresnelPair {
    Complex perp;  // E perpendicular to the plane of incidence
    Complex par;   // E in the plane of incidence
};

/// Air-to-half-space reflection. `cos_incidence` is measured from the surface normal.
FresnelPair fresnel_coefficients(const Material& m, double cos_incidence, double f_hz);
FresnelPair fresnel_coefficients(Complex eps, double cos_incidence);

/// Transmitted power fraction at a half-space interface, per polarization.
std::pair<double, double> half_space_power_transmittance(Complex eps, double cos_incidence);

/// Homogeneous slab in air, multiple internal reflections summed, straight-through geometry.
FresnelPair slab_transmission(const Material& m, double cos_incidence, double f_hz);

/// Directive effective-roughness lobe. Normalized so that the integral of the squared
/// amplitude over the hemisphere equals scatter_s^2 when the lobe points along the normal.
double scattering_amplitude(const Material& m, const Vec3& incident_dir, const Vec3& scattered_dir,
                            const Vec3& normal);

/// Hemisphere integral of ((1 + cos psi) / 2)^alpha for a lobe centred on the normal.
double lobe_hemisphere_integral(int lobe_alpha);

}  // namespace chantwin
