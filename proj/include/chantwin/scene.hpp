#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chantwin/geometry.hpp"
#include "chantwin/materials.hpp"

namespace chantwin {

struct Triangle {
    std::array<std::uint32_t, 3> v{};
    std::uint32_t material_id = 0;

    bool operator==(const Triangle&) const = default;
};

struct Keyframe {
    double t = 0.0;
    Vec3 position;
    double yaw_deg = 0.0;

    bool operator==(const Keyframe&) const = default;
};

struct Pose {
    Vec3 position;
    double yaw_deg = 0.0;

    Vec3 apply(const Vec3& local) const;
};

/// Rigid mesh moving along keyframes. Vertices are in the object's local frame.
struct DynamicObject {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Keyframe> keyframes;

    /// Linear position and shortest-arc yaw interpolation; clamps outside the keyframe range.
    Pose pose_at(double time_s) const;

    bool operator==(const DynamicObject&) const = default;
};

struct Scene {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<DynamicObject> dynamic_objects;
    Aabb bounds;
    std::size_t dropped_degenerate = 0;

    bool operator==(const Scene&) const = default;
};

inline constexpr double kDegenerateArea = 1e-9;

/// Validates indices, material ids, keyframes; drops degenerate triangles; computes bounds.
Scene finalize_scene(Scene scene, const MaterialLibrary& lib);

Scene parse_scene(const std::string& json_text, const MaterialLibrary& lib);
Scene load_scene(const std::filesystem::path& path, const MaterialLibrary& lib);
std::string scene_to_json(const Scene& scene);

/// Flat, world-space triangle soup of one time instant. Triangle ids: static triangles first,
/// then dynamic-object triangles in object order.
struct PosedScene {
    std::vector<std::array<Vec3, 3>> triangles;
    std::vector<std::uint32_t> material_ids;
    std::vector<Vec3> normals;  // unit, from winding order
    std::vector<std::uint32_t> plane_group;  // coplanar triangles share a group id
    std::size_t static_count = 0;
    std::size_t plane_group_count = 0;
    Aabb bounds;
    double time_s = 0.0;

    std::size_t size() const { return triangles.size(); }
    const Vec3& normal(std::size_t id) const { return normals[id]; }
    const Vec3& anchor(std::size_t id) const { return triangles[id][0]; }
};

PosedScene snapshot(const Scene& scene, double time_s);

/// Point-in-triangle test on the triangle's plane with a barycentric tolerance.
bool triangle_contains(const std::array<Vec3, 3>& tri, const Vec3& p, double tol = 1e-9);

struct DiffractionEdge {
    std::array<Vec3, 2> endpoints;
    std::array<Vec3, 2> face_normals;      // outward normals of face 0 and face n
    std::array<std::uint32_t, 2> faces{};  // triangle ids
    double interior_wedge_angle = 0.0;     // radians, inside the solid
    std::uint32_t material_id = 0;

    double exterior_n() const { return (2.0 * kPi - interior_wedge_angle) / kPi; }
};

inline constexpr double kDefaultDihedralThresholdDeg = 10.0;

std::vector<DiffractionEdge> extract_diffraction_edges(const PosedScene& posed,
                                                       double dihedral_threshold_deg = kDefaultDihedralThresholdDeg);
std::vector<DiffractionEdge> extract_diffraction_edges(const Scene& scene, double time_s,
                                                       double dihedral_threshold_deg = kDefaultDihedralThresholdDeg);

/// True when `p` lies inside a closed, outward-wound mesh (upward probe hits a back face).
bool point_inside_geometry(const class BvhIndex& bvh, const PosedScene& posed, const Vec3& p);

}  // namespace chantwin
