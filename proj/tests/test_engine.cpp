#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "chantwin/channel.hpp"
#include "chantwin/errors.hpp"
#include "chantwin/fixtures.hpp"
#include "chantwin/mpc_io.hpp"
#include "chantwin/profiles.hpp"
#include "chantwin/rng.hpp"

using namespace chantwin;

namespace {

const MaterialLibrary& lib() {
    static const MaterialLibrary l = default_material_library();
    return l;
}

double fspl_db(double d, double f) { return 20.0 * std::log10(4.0 * kPi * d * f / kSpeedOfLight); }

EngineConfig only(int reflections, int transmissions, int diffractions, int scatterings) {
    EngineConfig c;
    c.max_order = std::max({reflections, transmissions, diffractions, scatterings, 1});
    c.max_reflections = reflections;
    c.max_transmissions = transmissions;
    c.max_diffractions = diffractions;
    c.max_scatterings = scatterings;
    c.rel_power_floor_db = -200.0;
    return c;
}

Terminal at(const Vec3& p) { return Terminal{p, {}, 0.0, {}}; }

std::size_t count_kind(const PropagationPath& p, InteractionKind k) {
    return std::count_if(p.interactions.begin(), p.interactions.end(), [&](const auto& i) { return i.kind == k; });
}

// ITU-R P.526 single knife-edge loss J(nu), nu > -0.78.
double itu_knife_edge_db(double nu) {
    return 6.9 + 20.0 * std::log10(std::sqrt((nu - 0.1) * (nu - 0.1) + 1.0) + nu - 0.1);
}

// Shoebox image lattice: path lengths of every image source with total order <= max_order.
std::vector<double> shoebox_path_lengths(const Vec3& size, const Vec3& tx, const Vec3& rx, int max_order) {
    std::vector<double> out;
    struct Img {
        double coord;
        int order;
    };
    auto axis = [&](double l, double x0) {
        std::vector<Img> v;
        for (int i = -3; i <= 3; ++i) {
            v.push_back({2.0 * i * l + x0, std::abs(2 * i)});
            v.push_back({2.0 * i * l - x0, std::abs(2 * i - 1)});
        }
        return v;
    };
    for (const auto& ix : axis(size.x, tx.x))
        for (const auto& iy : axis(size.y, tx.y))
            for (const auto& iz : axis(size.z, tx.z))
                if (ix.order + iy.order + iz.order <= max_order)
                    out.push_back(distance(Vec3{ix.coord, iy.coord, iz.coord}, rx));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(FreeSpace, MatchesFriis) {
    const Scene fs = fixtures::free_space();
    const auto cfg = builtin_profile("online").engine;
    const auto a = simulate_link(fs, at({0, 0, 10}), at({100, 0, 10}), 6e9, cfg, 0.0, lib());
    ASSERT_EQ(a.paths.size(), 1u);
    EXPECT_NEAR(*path_loss(a), fspl_db(100.0, 6e9), 1e-9);
    EXPECT_NEAR(*path_loss(a), 88.01, 0.01);
    const auto b = simulate_link(fs, at({0, 0, 0}), at({0, 1000, 0}), 14.8e9, cfg, 0.0, lib());
    EXPECT_NEAR(*path_loss(b), 115.86, 0.01);
    EXPECT_NEAR(a.paths[0].delay, 100.0 / kSpeedOfLight, 1e-18);
}

TEST(TwoRay, MatchesAnalyticFormula) {
    const Scene ground = fixtures::ground_plane();
    const Material& g = lib().at(fixtures::kGround);
    const double f = 3.5e9, k = 2.0 * kPi * f / kSpeedOfLight, ht = 10.0, hr = 1.5;
    for (double d = 10.0; d <= 500.0; d *= 1.17) {
        const auto r = simulate_link(ground, at({0, 0, ht}), at({d, 0, hr}), f, only(1, 0, 0, 0), 0.0, lib());
        ASSERT_EQ(r.paths.size(), 2u) << d;
        const double r1 = std::hypot(d, ht - hr), r2 = std::hypot(d, ht + hr);
        const Complex gamma = fresnel_coefficients(g, (ht + hr) / r2, f).par;
        const Complex j(0.0, 1.0);
        const Complex field = (1.0 / (2.0 * k)) * (std::exp(-j * k * r1) / r1 + gamma * std::exp(-j * k * r2) / r2);
        EXPECT_NEAR(*path_loss(r, PathLossMode::Coherent), -20.0 * std::log10(std::abs(field)), 0.1) << d;
    }
}

TEST(Reflection, SingleWallUsesPerpendicularCoefficient) {
    fixtures::MeshBuilder mb;
    mb.quad({0, 20, -50}, {0, -20, -50}, {0, -20, 50}, {0, 20, 50}, fixtures::kConcrete);
    Scene wall;
    wall.vertices = mb.vertices;
    wall.triangles = mb.triangles;
    wall = finalize_scene(wall, lib());
    const double f = 2.4e9;
    const Vec3 tx{-5, -3, 1}, rx{-8, 6, 1};
    const auto r = simulate_link(wall, at(tx), at(rx), f, only(1, 0, 0, 0), 0.0, lib());
    ASSERT_EQ(r.paths.size(), 2u);
    const auto& refl = r.paths[1];
    ASSERT_EQ(count_kind(refl, InteractionKind::Reflection), 1u);
    const Vec3 image{5, -3, 1};
    const double len = distance(image, rx);
    EXPECT_NEAR(refl.path_length, len, 1e-9);
    const double cos_inc = std::abs(rx.x - image.x) / len;
    const Complex gamma = fresnel_coefficients(lib().at(fixtures::kConcrete), cos_inc, f).perp;
    EXPECT_NEAR(refl.power_db(), -fspl_db(len, f) + 20.0 * std::log10(std::abs(gamma)), 1e-6);
}

TEST(Transmission, NormalIncidenceThroughWall) {
    fixtures::MeshBuilder mb;
    mb.quad({0, 20, -50}, {0, -20, -50}, {0, -20, 50}, {0, 20, 50}, fixtures::kBrick);
    Scene wall;
    wall.vertices = mb.vertices;
    wall.triangles = mb.triangles;
    wall = finalize_scene(wall, lib());
    const double f = 5e9;
    const auto r = simulate_link(wall, at({-10, 0.3, 0.2}), at({15, 0.3, 0.2}), f, only(0, 1, 0, 0), 0.0, lib());
    ASSERT_EQ(r.paths.size(), 1u);
    ASSERT_EQ(count_kind(r.paths[0], InteractionKind::Transmission), 1u);
    const auto t = slab_transmission(lib().at(fixtures::kBrick), 1.0, f);
    EXPECT_NEAR(r.paths[0].power_db(), -fspl_db(25.0, f) + 20.0 * std::log10(std::abs(t.perp)), 1e-6);
}

TEST(ImageMethod, ShoeboxMatchesImageLattice) {
    const Vec3 size{10, 8, 3};
    const auto room = fixtures::room({0, 0, 0}, size);
    const EngineConfig cfg;
    const auto snap = make_snapshot(room, 0.0, cfg);
    const Vec3 tx{2.3, 3.1, 1.1}, rx{7.6, 5.4, 1.7};  // general position: no path grazes a corner
    const std::size_t expected_counts[] = {1, 7, 25, 63};
    for (int order = 0; order <= 3; ++order) {
        const auto paths = enumerate_images(snap, tx, rx, order);
        ASSERT_EQ(paths.size(), expected_counts[order]) << order;
        std::vector<double> got;
        for (const auto& p : paths) got.push_back(p.path_length);
        std::sort(got.begin(), got.end());
        const auto oracle = shoebox_path_lengths(size, tx, rx, order);
        ASSERT_EQ(got.size(), oracle.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], oracle[i], 1e-9);
    }
}

TEST(ImageMethod, RefusesLargeScenes) {
    const auto campus = fixtures::campus(2);
    ASSERT_GT(campus.scene.triangles.size(), kImageMethodFacetLimit);
    const auto snap = make_snapshot(campus.scene, 0.0, EngineConfig{});
    EXPECT_THROW(enumerate_images(snap, {0, 0, 10}, {10, 10, 1.5}, 2), SceneTooLargeError);
}

TEST(ImageMethod, SbrFindsOnlyTruePathsInRoom) {
    const auto room = fixtures::room({0, 0, 0}, {9, 7, 3.2});
    auto cfg = builtin_profile("offline").engine;
    cfg.image_method = false;
    cfg.max_diffractions = cfg.max_scatterings = cfg.max_transmissions = 0;
    cfg.max_reflections = 3;
    cfg.rel_power_floor_db = -200.0;
    const Vec3 tx{1.7, 2.2, 1.1}, rx{6.4, 5.1, 1.7};
    const auto snap = make_snapshot(room, 0.0, cfg);
    double total = 0.0;
    const auto im = enumerate_images(snap, tx, rx, 3);
    std::set<long long> im_lengths;
    for (const auto& p : im) im_lengths.insert(std::llround(p.path_length * 1e6));
    const auto r = simulate_link(room, at(tx), at(rx), 3.5e9, cfg, 0.0, lib());
    for (const auto& p : r.paths) EXPECT_TRUE(im_lengths.count(std::llround(p.path_length * 1e6))) << p.path_length;
    const LinkGeometry g{tx, rx, 3.5e9, 0.0, im};
    for (const auto& p : evaluate_link(g, lib(), {}, {}, -200.0).paths) total += std::norm(p.amplitude);
    double found = 0.0;
    for (const auto& p : r.paths) found += std::norm(p.amplitude);
    EXPECT_GE(found / total, 0.99);
}

TEST(Diffraction, DeepShadowMatchesKnifeEdge) {
    const auto screen = fixtures::knife_edge(10.0);
    const double f = 1e9, lambda = kSpeedOfLight / f;
    const double d1 = 100.0, d2 = 100.0;
    for (double nu = 1.0; nu <= 3.0 + 1e-9; nu += 0.5) {
        const double h = nu / std::sqrt(2.0 * (d1 + d2) / (lambda * d1 * d2));
        const Vec3 tx{-d1, 0, 10.0 - h}, rx{d2, 0, 10.0 - h};
        const auto r = simulate_link(screen, at(tx), at(rx), f, only(0, 0, 1, 0), 0.0, lib());
        ASSERT_FALSE(r.paths.empty()) << nu;
        const double excess = *path_loss(r) - fspl_db(distance(tx, rx), f);
        EXPECT_NEAR(excess, itu_knife_edge_db(nu), 1.5) << nu;
    }
}

TEST(Diffraction, FieldContinuousAcrossShadowBoundaries) {
    const auto screen = fixtures::knife_edge(10.0);
    const double f = 2e9;
    const Vec3 tx{-100, 0, 5};
    auto cfg = only(1, 0, 1, 0);
    auto level = [&](const Vec3& rx) { return *path_loss(simulate_link(screen, at(tx), at(rx), f, cfg, 0.0, lib()),
                                                         PathLossMode::Coherent); };
    // Incident shadow boundary behind the screen: line from tx over the apex.
    const double z_isb = 10.0 + 5.0 / 100.0 * 100.0;
    EXPECT_NEAR(level({100, 0, z_isb + 1e-3}), level({100, 0, z_isb - 1e-3}), 0.5);
    // Reflection shadow boundary in front: line from the tx image (100, 0, 5) over the apex.
    const double z_rsb = 10.0 + 0.05 * 50.0;
    EXPECT_NEAR(level({-50, 0, z_rsb + 1e-3}), level({-50, 0, z_rsb - 1e-3}), 0.5);
}

TEST(Reciprocity, CampusLinksSwapSymmetric) {
    const auto campus = fixtures::campus();
    const auto cfg = builtin_profile("online").engine;
    const auto snap = make_snapshot(campus.scene, 0.0, cfg);
    Rng rng(11);
    int checked = 0;
    while (checked < 10) {
        const Vec3 a{rng.uniform(-55, 55), rng.uniform(-55, 55), rng.uniform(1.5, 12)};
        const Vec3 b{rng.uniform(-55, 55), rng.uniform(-55, 55), 1.5};
        if (point_inside_geometry(snap.bvh, snap.posed, a) || point_inside_geometry(snap.bvh, snap.posed, b)) continue;
        const auto ab = simulate_link(campus.scene, at(a), at(b), 3.5e9, cfg, 0.0, lib());
        const auto ba = simulate_link(campus.scene, at(b), at(a), 3.5e9, cfg, 0.0, lib());
        ASSERT_EQ(ab.paths.size(), ba.paths.size());
        std::multiset<std::pair<double, double>> x, y;
        for (std::size_t i = 0; i < ab.paths.size(); ++i) {
            EXPECT_NEAR(ab.paths[i].delay, ba.paths[i].delay, 1e-9 / kSpeedOfLight * 1e-3 + 1e-15);
            EXPECT_NEAR(ab.paths[i].power_db(), ba.paths[i].power_db(), 0.01);
        }
        ++checked;
    }
}

TEST(Determinism, RepeatedAndThreadedRunsAreBitIdentical) {
    const auto campus = fixtures::campus();
    auto cfg = builtin_profile("online").engine;
    cfg.seed = 99;
    const Terminal tx = at({0, -20, 10}), rx = at({30, 10, 1.5});
    const auto a = mpc_json(simulate_link(campus.scene, tx, rx, 3.5e9, cfg, 0.0, lib(), 1));
    const auto b = mpc_json(simulate_link(campus.scene, tx, rx, 3.5e9, cfg, 0.0, lib(), 1));
    const auto c = mpc_json(simulate_link(campus.scene, tx, rx, 3.5e9, cfg, 0.0, lib(), 4));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Campus, ExtractedEdgesEqualDeclaredEdges) {
    const auto campus = fixtures::campus();
    EXPECT_EQ(campus.building_count, 10u);
    const auto edges = extract_diffraction_edges(campus.scene, 0.0);
    ASSERT_EQ(edges.size(), campus.edges.size());
    auto key = [](Vec3 a, Vec3 b) {
        if (std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z)) std::swap(a, b);
        return std::array<long long, 6>{std::llround(a.x * 1e6), std::llround(a.y * 1e6), std::llround(a.z * 1e6),
                                        std::llround(b.x * 1e6), std::llround(b.y * 1e6), std::llround(b.z * 1e6)};
    };
    std::set<std::array<long long, 6>> declared, found;
    for (const auto& e : campus.edges) declared.insert(key(e[0], e[1]));
    for (const auto& e : edges) found.insert(key(e.endpoints[0], e.endpoints[1]));
    EXPECT_EQ(declared, found);
}

TEST(Doppler, RecedingReceiverOnLineOfSight) {
    const Scene fs = fixtures::free_space();
    const double f = 6e9, v = 10.0, dt = 1e-3;
    const auto cfg = builtin_profile("online").engine;
    auto r0 = simulate_link(fs, at({0, 0, 10}), at({50, 0, 10}), f, cfg, 0.0, lib());
    const auto r1 = simulate_link(fs, at({0, 0, 10}), at({50 + v * dt, 0, 10}), f, cfg, dt, lib());
    doppler_annotate(r0, r1, dt);
    EXPECT_NEAR(r0.paths[0].doppler_hz, -v * f / kSpeedOfLight, 1e-6);
    EXPECT_NEAR(r0.paths[0].doppler_hz, -200.7, 0.01 * 200.7);
}

TEST(V2v, VehiclesFollowScriptedKinematics) {
    const auto v = fixtures::V2v{fixtures::v2v()};
    for (double t = 0.0; t <= v.duration_s; t += 0.25) {
        const Vec3 up{0, 0, fixtures::V2v::kAntennaHeight};
        EXPECT_NEAR(distance(v.tx.world_position(v.scene, t), fixtures::V2v::tx_vehicle_position(t) + up), 0.0, 1e-3) << t;
        EXPECT_NEAR(distance(v.rx.world_position(v.scene, t), fixtures::V2v::rx_vehicle_position(t) + up), 0.0, 1e-3) << t;
    }
    EXPECT_NEAR(fixtures::V2v::rx_vehicle_position(3.0).y, -20.0, 1e-12);
    EXPECT_NEAR(fixtures::V2v::rx_vehicle_position(5.0).y, -15.0, 1e-12);
    EXPECT_NEAR(fixtures::V2v::rx_vehicle_position(7.0).y, -15.0, 1e-12);
    EXPECT_NEAR(fixtures::V2v::tx_vehicle_position(6.0).x, 0.0, 1e-12);
}

TEST(V2v, LineOfSightDopplerChangesSignAtClosestApproach) {
    const auto v = fixtures::v2v();
    const auto cfg = builtin_profile("online").engine;
    auto los_doppler = [&](double t) {
        auto r0 = simulate_link(v.scene, v.tx, v.rx, 5.9e9, cfg, t, lib());
        const auto r1 = simulate_link(v.scene, v.tx, v.rx, 5.9e9, cfg, t + 0.01, lib());
        doppler_annotate(r0, r1, 0.01);
        for (const auto& p : r0.paths)
            if (p.interactions.empty()) return p.doppler_hz;
        ADD_FAILURE() << "no LoS at t=" << t;
        return 0.0;
    };
    EXPECT_GT(los_doppler(4.0), 0.0);
    EXPECT_LT(los_doppler(7.5), 0.0);
}

TEST(Scattering, TilePathMatchesDirectiveModel) {
    const Scene ground = fixtures::ground_plane(20.0, fixtures::kConcrete);
    auto cfg = only(0, 0, 0, 1);
    cfg.scatter_tile_m = 2.0;
    const double f = 3.5e9, lambda = kSpeedOfLight / f;
    const Vec3 tx{-10, 0, 5}, rx{10, 3, 2};
    const auto snap = make_snapshot(ground, 0.0, cfg);
    const auto paths = scattering_paths(snap, tx, rx, cfg, lib());
    ASSERT_GT(paths.size(), 50u);
    const Material& m = lib().at(fixtures::kConcrete);
    for (const auto& p : paths) {
        const auto& it = p.interactions.at(0);
        const Vec3 din = normalize(it.point - tx), dout = normalize(rx - it.point);
        const double ri = distance(tx, it.point), rs = distance(it.point, rx);
        const double amp = scattering_amplitude(m, din, dout, it.normal);
        const double scalar = lambda / (4.0 * kPi) * std::sqrt(it.tile_area * std::abs(dot(din, it.normal)) *
                                                               std::abs(dot(dout, it.normal))) * amp / (ri * rs);
        const auto field = compute_field(p, lib(), f);
        double frob = 0.0;
        for (const auto& row : field.jones)
            for (const auto& e : row) frob += std::norm(e);
        EXPECT_NEAR(frob, scalar * scalar * (1.0 + dot(din, dout) * dot(din, dout)), 1e-9 * frob);
    }
}

TEST(Config, RejectsInvalidBounds) {
    EngineConfig c;
    c.max_diffractions = 2;
    c.max_order = 3;
    EXPECT_THROW(validate_config(c), ValidationError);
    c = EngineConfig{};
    c.max_reflections = 5;
    EXPECT_THROW(validate_config(c), ValidationError);
    c = EngineConfig{};
    c.rel_power_floor_db = 3.0;
    EXPECT_THROW(validate_config(c), ValidationError);
}

TEST(Launch, FibonacciDirectionsAreUnitAndBalanced) {
    const auto dirs = launch_directions(4096);
    ASSERT_EQ(dirs.size(), 4096u);
    Vec3 sum{0, 0, 0};
    for (const auto& d : dirs) {
        EXPECT_NEAR(norm(d), 1.0, 1e-12);
        sum += d;
    }
    EXPECT_LT(norm(sum) / 4096.0, 1e-3);
}

TEST(Paths, SortedByDelayWithLineOfSightFirst) {
    const auto campus = fixtures::campus();
    const auto r = simulate_link(campus.scene, at({0, -20, 10}), at({-10, -15, 1.5}), 3.5e9,
                                 builtin_profile("online").engine, 0.0, lib());
    ASSERT_FALSE(r.paths.empty());
    EXPECT_TRUE(r.paths[0].interactions.empty());
    for (std::size_t i = 1; i < r.paths.size(); ++i) EXPECT_LE(r.paths[i - 1].delay, r.paths[i].delay);
}
