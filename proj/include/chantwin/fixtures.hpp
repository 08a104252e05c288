#pragma once

#include <array>
#include <string>
#include <vector>

#include "chantwin/engine.hpp"
#include "chantwin/scene.hpp"

namespace chantwin::fixtures {

/// Material ids of the default library.
enum MaterialId : std::uint32_t { kConcrete = 0, kBrick = 1, kGlass = 2, kWood = 3, kMetal = 4, kGround = 5 };

struct MeshBuilder {
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;

    /// Planar quad a-b-c-d (counter-clockwise seen from the normal side), split into a
    /// `subdivisions` x `subdivisions` lattice of triangle pairs.
    void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, std::uint32_t material, int subdivisions = 1);

    /// Axis-aligned box with outward normals (inward when `inward`).
    void box(const Vec3& lo, const Vec3& hi, std::uint32_t material, bool with_bottom = true, bool inward = false,
             int subdivisions = 1);
};

Scene free_space();

/// Square ground at z = 0 with the given half extent.
Scene ground_plane(double half_extent = 1e5, std::uint32_t material = kGround);

/// Closed room with inward-facing walls (12 triangles).
Scene room(const Vec3& lo, const Vec3& hi, std::uint32_t material = kConcrete);

/// Closed box with outward faces (12 triangles, 12 convex edges).
Scene box(const Vec3& lo, const Vec3& hi, std::uint32_t material = kConcrete);

/// Thin screen in the plane x = 0: apex edge along y at height `apex_z`, extending down to
/// `bottom_z` and across |y| <= half_width. Interior wedge angle `wedge_deg`.
Scene knife_edge(double apex_z, double bottom_z = -2000.0, double half_width = 2000.0, double wedge_deg = 1.0,
                 std::uint32_t material = kMetal);

struct Campus {
    Scene scene;
    std::size_t building_count = 0;
    std::size_t triangle_count = 0;
    std::vector<std::array<Vec3, 2>> edges;          // declared diffraction edges
    std::vector<std::array<double, 4>> footprints;   // xmin, ymin, xmax, ymax per building
    Aabb area;                                       // 100 m x 100 m planning area
};

/// Ten box buildings (no bottoms) on a ground plane over a 100 m x 100 m area.
Campus campus(int subdivisions = 1);

/// Crossroad with two vehicles. Tx vehicle drives along +x (10 m/s = 36 km/h) and passes
/// x = 0 at t = 6 s; the Rx vehicle drives along +y at 5 m/s (18 km/h), brakes to a stop at
/// y = -15 m at t = 5 s, waits until t = 8 s and accelerates back to 5 m/s.
struct V2v {
    Scene scene;
    Terminal tx;
    Terminal rx;
    double duration_s = 12.0;

    static Vec3 tx_vehicle_position(double t);
    static Vec3 rx_vehicle_position(double t);
    static constexpr double kAntennaHeight = 2.0;
};

V2v v2v();

/// Seeded uniform points at `height` inside the scene bounds shrunk by `margin`, skipping points
/// inside closed geometry. An empty scene samples [-50, 50]^2.
std::vector<Vec3> outdoor_points(const Scene& scene, std::size_t count, std::uint64_t seed, double height = 1.5,
                                 double margin = 5.0);

}  // namespace chantwin::fixtures
