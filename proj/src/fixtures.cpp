#include "chantwin/fixtures.hpp"

#include "chantwin/rng.hpp"

namespace chantwin::fixtures {

namespace {

std::uint32_t add_vertex(MeshBuilder& m, const Vec3& v) {
    m.vertices.push_back(v);
    return static_cast<std::uint32_t>(m.vertices.size() - 1);
}

Scene finish(MeshBuilder m) {
    Scene s;
    s.vertices = std::move(m.vertices);
    s.triangles = std::move(m.triangles);
    return finalize_scene(std::move(s), default_material_library());
}

}  // namespace

void MeshBuilder::quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, std::uint32_t material,
                       int subdivisions) {
    const int n = std::max(1, subdivisions);
    const auto base = static_cast<std::uint32_t>(vertices.size());
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
            const double u = static_cast<double>(i) / n, v = static_cast<double>(j) / n;
            // Bilinear point on the (planar) quad.
            vertices.push_back(a * ((1 - u) * (1 - v)) + b * (u * (1 - v)) + c * (u * v) + d * ((1 - u) * v));
        }
    auto at = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (n + 1) + i); };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            triangles.push_back({{at(i, j), at(i + 1, j), at(i + 1, j + 1)}, material});
            triangles.push_back({{at(i, j), at(i + 1, j + 1), at(i, j + 1)}, material});
        }
}

void MeshBuilder::box(const Vec3& lo, const Vec3& hi, std::uint32_t material, bool with_bottom, bool inward,
                      int subdivisions) {
    const Vec3 p000{lo.x, lo.y, lo.z}, p100{hi.x, lo.y, lo.z}, p110{hi.x, hi.y, lo.z}, p010{lo.x, hi.y, lo.z};
    const Vec3 p001{lo.x, lo.y, hi.z}, p101{hi.x, lo.y, hi.z}, p111{hi.x, hi.y, hi.z}, p011{lo.x, hi.y, hi.z};
    auto face = [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
        if (inward)
            quad(a, d, c, b, material, subdivisions);
        else
            quad(a, b, c, d, material, subdivisions);
    };
    face(p001, p101, p111, p011);  // top, +z
    if (with_bottom) face(p000, p010, p110, p100);
    face(p000, p100, p101, p001);  // -y
    face(p100, p110, p111, p101);  // +x
    face(p110, p010, p011, p111);  // +y
    face(p010, p000, p001, p011);  // -x
}

Scene free_space() { return finish({}); }

Scene ground_plane(double half_extent, std::uint32_t material) {
    MeshBuilder m;
    const double h = half_extent;
    m.quad({-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}, material);
    return finish(std::move(m));
}

Scene room(const Vec3& lo, const Vec3& hi, std::uint32_t material) {
    MeshBuilder m;
    m.box(lo, hi, material, true, true);
    return finish(std::move(m));
}

Scene box(const Vec3& lo, const Vec3& hi, std::uint32_t material) {
    MeshBuilder m;
    m.box(lo, hi, material, true, false);
    return finish(std::move(m));
}

Scene knife_edge(double apex_z, double bottom_z, double half_width, double wedge_deg, std::uint32_t material) {
    MeshBuilder m;
    const double half_angle = wedge_deg * kPi / 360.0;
    const double offset = (apex_z - bottom_z) * std::tan(half_angle);
    const double w = half_width;
    // Face 0 looks towards -x, face 1 towards +x; they share the apex edge.
    const std::uint32_t a0 = add_vertex(m, {0.0, -w, apex_z});
    const std::uint32_t a1 = add_vertex(m, {0.0, w, apex_z});
    const std::uint32_t l0 = add_vertex(m, {-offset, -w, bottom_z});
    const std::uint32_t l1 = add_vertex(m, {-offset, w, bottom_z});
    const std::uint32_t r0 = add_vertex(m, {offset, -w, bottom_z});
    const std::uint32_t r1 = add_vertex(m, {offset, w, bottom_z});
    m.triangles.push_back({{a0, l1, l0}, material});
    m.triangles.push_back({{a0, a1, l1}, material});
    m.triangles.push_back({{a0, r1, a1}, material});
    m.triangles.push_back({{a0, r0, r1}, material});
    return finish(std::move(m));
}

Campus campus(int subdivisions) {
    struct Building {
        double x0, y0, x1, y1, h;
    };
    static constexpr std::array<Building, 10> kBuildings{{
        {-46, -46, -30, -28, 12},
        {-20, -46, -6, -32, 18},
        {6, -44, 20, -30, 9},
        {30, -42, 46, -26, 15},
        {-44, -12, -28, 6, 21},
        {-16, -10, -4, 4, 7.5},
        {14, -14, 26, 0, 24},
        {-40, 22, -24, 40, 10.5},
        {-6, 18, 10, 34, 13.5},
        {24, 20, 44, 44, 16.5},
    }};
    const int n = std::max(1, subdivisions);
    MeshBuilder m;
    m.quad({-60, -60, 0}, {60, -60, 0}, {60, 60, 0}, {-60, 60, 0}, kGround);
    Campus c;
    for (const auto& b : kBuildings) {
        m.box({b.x0, b.y0, 0.0}, {b.x1, b.y1, b.h}, kConcrete, false, false, n);
        c.footprints.push_back({b.x0, b.y0, b.x1, b.y1});
        const std::array<Vec3, 4> roof{Vec3{b.x0, b.y0, b.h}, Vec3{b.x1, b.y0, b.h}, Vec3{b.x1, b.y1, b.h},
                                       Vec3{b.x0, b.y1, b.h}};
        for (int k = 0; k < 4; ++k) {
            const Vec3 a = roof[k], e = roof[(k + 1) % 4];
            const Vec3 g{a.x, a.y, 0.0};
            for (int s = 0; s < n; ++s) {
                c.edges.push_back({a + (e - a) * (static_cast<double>(s) / n), a + (e - a) * (static_cast<double>(s + 1) / n)});
                c.edges.push_back({g + (a - g) * (static_cast<double>(s) / n), g + (a - g) * (static_cast<double>(s + 1) / n)});
            }
        }
    }
    c.building_count = kBuildings.size();
    c.triangle_count = m.triangles.size();
    c.area.extend(Vec3{-50, -50, 0});
    c.area.extend(Vec3{50, 50, 0});
    c.scene = finish(std::move(m));
    return c;
}

Vec3 V2v::tx_vehicle_position(double t) { return {-60.0 + 10.0 * t, 2.0, 0.0}; }

Vec3 V2v::rx_vehicle_position(double t) {
    double y;
    if (t <= 3.0)
        y = -35.0 + 5.0 * t;
    else if (t <= 5.0)
        y = -20.0 + 5.0 * (t - 3.0) - 1.25 * (t - 3.0) * (t - 3.0);
    else if (t <= 8.0)
        y = -15.0;
    else if (t <= 10.0)
        y = -15.0 + 1.25 * (t - 8.0) * (t - 8.0);
    else
        y = -10.0 + 5.0 * (t - 10.0);
    return {0.0, y, 0.0};
}

V2v v2v() {
    MeshBuilder m;
    m.quad({-120, -120, 0}, {120, -120, 0}, {120, 120, 0}, {-120, 120, 0}, kGround);
    // Corner buildings set back from both roads.
    m.box({-60, 12, 0}, {-12, 60, 15}, kConcrete, false);
    m.box({12, 12, 0}, {60, 60, 20}, kConcrete, false);
    m.box({-60, -60, 0}, {-12, -12, 12}, kBrick, false);
    m.box({12, -60, 0}, {60, -8, 18}, kConcrete, false);

    Scene s;
    s.vertices = std::move(m.vertices);
    s.triangles = std::move(m.triangles);

    auto vehicle = [] {
        MeshBuilder v;
        v.box({-2.25, -0.9, 0.0}, {2.25, 0.9, 1.5}, kMetal);
        DynamicObject o;
        o.vertices = std::move(v.vertices);
        o.triangles = std::move(v.triangles);
        return o;
    };
    V2v out;
    constexpr double kStep = 0.05;
    DynamicObject tx_car = vehicle(), rx_car = vehicle();
    for (int i = 0; i * kStep <= out.duration_s + 1e-9; ++i) {
        const double t = i * kStep;
        tx_car.keyframes.push_back({t, V2v::tx_vehicle_position(t), 0.0});
        rx_car.keyframes.push_back({t, V2v::rx_vehicle_position(t), 90.0});
    }
    s.dynamic_objects = {std::move(tx_car), std::move(rx_car)};
    out.scene = finalize_scene(std::move(s), default_material_library());
    out.tx.position = {0.0, 0.0, V2v::kAntennaHeight};
    out.tx.attached_object = 0;
    out.rx.position = {0.0, 0.0, V2v::kAntennaHeight};
    out.rx.attached_object = 1;
    return out;
}

std::vector<Vec3> outdoor_points(const Scene& scene, std::size_t count, std::uint64_t seed, double height,
                                 double margin) {
    const auto snap = make_snapshot(scene, 0.0, EngineConfig{});
    const auto b = scene.bounds.empty() ? Aabb{{-50, -50, 0}, {50, 50, 0}} : scene.bounds;
    Rng rng(seed);
    std::vector<Vec3> pos;
    for (std::size_t guard = 0; pos.size() < count && guard < 100 * count; ++guard) {
        const Vec3 p{rng.uniform(b.lo.x + margin, b.hi.x - margin), rng.uniform(b.lo.y + margin, b.hi.y - margin), height};
        if (!point_inside_geometry(snap.bvh, snap.posed, p)) pos.push_back(p);
    }
    return pos;
}

}  // namespace chantwin::fixtures
