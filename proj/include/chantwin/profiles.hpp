#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chantwin/engine.hpp"

namespace chantwin {

struct TaskProfile {
    std::string name;
    EngineConfig engine;
    double grid_step_default = 1.0;
    double latency_budget_s = 1.0;  // per link, advisory
    std::vector<std::string> mechanisms;

    bool operator==(const TaskProfile&) const = default;
};

/// "offline", "online" or "custom". Unknown names raise ValidationError listing valid names.
TaskProfile builtin_profile(const std::string& name);
std::vector<std::string> builtin_profile_names();

/// Field-wise overrides; unset fields keep the preset value.
struct ProfileOverrides {
    std::optional<std::size_t> n_rays;
    std::optional<int> max_order;
    std::optional<int> max_reflections;
    std::optional<int> max_transmissions;
    std::optional<int> max_diffractions;
    std::optional<int> max_scatterings;
    std::optional<double> rel_power_floor_db;
    std::optional<double> rx_sphere_scale;
    std::optional<std::uint64_t> seed;
    std::optional<bool> bidirectional;
    std::optional<bool> image_method;
    std::optional<int> image_method_order;
    std::optional<int> diffraction_reflections;
    std::optional<double> scatter_tile_m;
};

/// Named presets may lower interaction bounds but never raise them; "custom" accepts anything
/// that passes config validation.
EngineConfig resolve_profile(const TaskProfile& profile, const ProfileOverrides& overrides);

ProfileOverrides parse_profile_overrides(const std::string& json_text);
ProfileOverrides load_profile_overrides(const std::filesystem::path& path);

/// Mechanism names enabled by a config ("reflection", "transmission", ...).
std::vector<std::string> enabled_mechanisms(const EngineConfig& cfg);

}  // namespace chantwin
