#include <algorithm>
#include <map>

#include "chantwin/errors.hpp"
#include "chantwin/parallel.hpp"
#include "chantwin/rng.hpp"
#include "engine_internal.hpp"

namespace chantwin {

char kind_letter(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::Reflection: return 'R';
        case InteractionKind::Transmission: return 'T';
        case InteractionKind::Diffraction: return 'D';
        case InteractionKind::Scattering: return 'S';
    }
    return '?';
}

InteractionKind kind_from_letter(char c) {
    switch (c) {
        case 'R': return InteractionKind::Reflection;
        case 'T': return InteractionKind::Transmission;
        case 'D': return InteractionKind::Diffraction;
        case 'S': return InteractionKind::Scattering;
        default: throw ParseError(std::string("unknown interaction kind '") + c + "'");
    }
}

Signature PropagationPath::signature() const {
    Signature s;
    s.reserve(interactions.size());
    for (const auto& it : interactions) s.push_back({it.kind, it.surface_id});
    return s;
}

double PropagationPath::power_db() const { return 10.0 * std::log10(std::norm(amplitude)); }

void validate_config(const EngineConfig& c) {
    if (c.n_rays < 1) throw ValidationError("engine config: n_rays must be >= 1");
    if (c.max_order < 0 || c.max_reflections < 0 || c.max_transmissions < 0 || c.max_diffractions < 0 ||
        c.max_scatterings < 0)
        throw ValidationError("engine config: interaction bounds must be non-negative");
    if (c.max_diffractions > 1) throw ValidationError("engine config: max_diffractions must be <= 1");
    if (c.max_scatterings > 1) throw ValidationError("engine config: max_scatterings must be <= 1");
    if (c.max_reflections > c.max_order || c.max_transmissions > c.max_order || c.max_diffractions > c.max_order ||
        c.max_scatterings > c.max_order)
        throw ValidationError("engine config: per-mechanism bound exceeds max_order");
    if (!(c.rel_power_floor_db < 0.0)) throw ValidationError("engine config: rel_power_floor_db must be < 0");
    if (!(c.rx_sphere_scale > 0.0)) throw ValidationError("engine config: rx_sphere_scale must be > 0");
    if (c.image_method_order < 0 || c.image_method_order > 3)
        throw ValidationError("engine config: image_method_order must be in [0, 3]");
    if (c.diffraction_reflections < 0 || c.diffraction_reflections > 1)
        throw ValidationError("engine config: diffraction_reflections must be 0 or 1");
    if (!(c.scatter_tile_m > 0.0)) throw ValidationError("engine config: scatter_tile_m must be > 0");
}

Vec3 Terminal::world_position(const Scene& scene, double time_s) const {
    if (!attached_object) return position;
    if (*attached_object >= scene.dynamic_objects.size())
        throw ValidationError("terminal attached to unknown dynamic object");
    return scene.dynamic_objects[*attached_object].pose_at(time_s).apply(position);
}

std::vector<ScatterTile> tile_surfaces(const PosedScene& posed,
                                       const std::vector<std::vector<std::uint32_t>>& group_members,
                                       double tile_size) {
    std::vector<ScatterTile> tiles;
    for (const auto& members : group_members) {
        if (members.empty()) continue;
        const Vec3 n = posed.normals[members.front()];
        // In-plane axes from the dominant normal component.
        const Vec3 helper = std::fabs(n.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
        const Vec3 u = normalize(cross(helper, n));
        const Vec3 v = cross(n, u);
        const Vec3 origin = posed.triangles[members.front()][0];
        double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
        for (auto id : members)
            for (const auto& p : posed.triangles[id]) {
                umin = std::min(umin, dot(p - origin, u));
                umax = std::max(umax, dot(p - origin, u));
                vmin = std::min(vmin, dot(p - origin, v));
                vmax = std::max(vmax, dot(p - origin, v));
            }
        const auto nu = static_cast<long>(std::ceil((umax - umin) / tile_size - 1e-9));
        const auto nv = static_cast<long>(std::ceil((vmax - vmin) / tile_size - 1e-9));
        std::vector<char> taken(static_cast<std::size_t>(std::max(nu, 1L) * std::max(nv, 1L)), 0);
        std::vector<std::pair<std::size_t, ScatterTile>> found;
        for (auto id : members) {
            double tu0 = 1e300, tu1 = -1e300, tv0 = 1e300, tv1 = -1e300;
            for (const auto& p : posed.triangles[id]) {
                tu0 = std::min(tu0, dot(p - origin, u));
                tu1 = std::max(tu1, dot(p - origin, u));
                tv0 = std::min(tv0, dot(p - origin, v));
                tv1 = std::max(tv1, dot(p - origin, v));
            }
            const long i0 = std::max(0L, static_cast<long>(std::floor((tu0 - umin) / tile_size - 0.5)));
            const long i1 = std::min(nu - 1, static_cast<long>(std::ceil((tu1 - umin) / tile_size - 0.5)));
            const long j0 = std::max(0L, static_cast<long>(std::floor((tv0 - vmin) / tile_size - 0.5)));
            const long j1 = std::min(nv - 1, static_cast<long>(std::ceil((tv1 - vmin) / tile_size - 0.5)));
            for (long j = j0; j <= j1; ++j)
                for (long i = i0; i <= i1; ++i) {
                    const auto cell = static_cast<std::size_t>(j * nu + i);
                    if (taken[cell]) continue;
                    const Vec3 c = origin + u * (umin + (i + 0.5) * tile_size) + v * (vmin + (j + 0.5) * tile_size);
                    if (!triangle_contains(posed.triangles[id], c, detail::kContainTol)) continue;
                    taken[cell] = 1;
                    found.push_back({cell, {c, n, tile_size * tile_size, id, posed.material_ids[id]}});
                }
        }
        std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& f : found) tiles.push_back(f.second);
    }
    return tiles;
}

SceneSnapshot make_snapshot(PosedScene posed, const EngineConfig& cfg) {
    SceneSnapshot snap;
    snap.bvh = BvhIndex(posed);
    snap.edges = extract_diffraction_edges(posed, cfg.dihedral_threshold_deg);
    snap.group_members.resize(posed.plane_group_count);
    for (std::uint32_t t = 0; t < posed.size(); ++t) snap.group_members[posed.plane_group[t]].push_back(t);
    snap.tile_size = cfg.scatter_tile_m;
    if (cfg.max_scatterings > 0) snap.tiles = tile_surfaces(posed, snap.group_members, cfg.scatter_tile_m);
    snap.posed = std::move(posed);
    return snap;
}

SceneSnapshot make_snapshot(const Scene& scene, double time_s, const EngineConfig& cfg) {
    return make_snapshot(snapshot(scene, time_s), cfg);
}

std::vector<Vec3> launch_directions(std::size_t n) {
    std::vector<Vec3> dirs;
    dirs.reserve(n);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    return dirs;
}

namespace detail {

namespace {

// Random rotation so different seeds sample different lattice orientations.
std::array<Vec3, 3> seeded_rotation(std::uint64_t seed) {
    Rng rng(seed);
    double q[4];
    double len = 0.0;
    do {
        len = 0.0;
        for (double& c : q) {
            c = rng.normal();
            len += c * c;
        }
    } while (len < 1e-12);
    len = std::sqrt(len);
    for (double& c : q) c /= len;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)},
            Vec3{2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)},
            Vec3{2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)}};
}

struct RayState {
    Vec3 origin;
    Vec3 dir;
    double l0;
    Signature sig;
    int reflections;
    int transmissions;
};

}  // namespace

void finish_path(PropagationPath& path) {
    double length = 0.0;
    Vec3 prev = path.tx;
    for (const auto& it : path.interactions) {
        length += distance(prev, it.point);
        prev = it.point;
    }
    length += distance(prev, path.rx);
    path.path_length = length;
    path.delay = length / kSpeedOfLight;
    const Vec3 first = path.interactions.empty() ? path.rx : path.interactions.front().point;
    const Vec3 last = path.interactions.empty() ? path.tx : path.interactions.back().point;
    path.departure_dir = normalize(first - path.tx);
    path.arrival_dir = normalize(last - path.rx);
    path.aod = direction_angles(path.departure_dir);
    path.aoa = direction_angles(path.arrival_dir);
}

std::optional<std::uint32_t> snap_to_group(const SceneSnapshot& snap, std::uint32_t triangle_id, const Vec3& p) {
    if (triangle_id >= snap.posed.size()) return std::nullopt;
    for (auto id : snap.group_members[snap.posed.plane_group[triangle_id]])
        if (triangle_contains(snap.posed.triangles[id], p, kContainTol)) return id;
    return std::nullopt;
}

bool same_side(const Vec3& a, const Vec3& b, const Vec3& anchor, const Vec3& n) {
    const double da = dot(a - anchor, n), db = dot(b - anchor, n);
    return (da > 1e-12 && db > 1e-12) || (da < -1e-12 && db < -1e-12);
}

Signature reversed(const Signature& s) { return Signature(s.rbegin(), s.rend()); }

ReceiverSet::ReceiverSet(std::vector<Vec3> points) : points_(std::move(points)) {
    for (const auto& p : points_) box_.extend(p);
    if (points_.size() <= 4) return;
    const Vec3 ext = box_.extent();
    const double area = std::max(ext.x, 1e-3) * std::max(ext.y, 1e-3);
    cell_ = std::max(1.0, std::sqrt(area / static_cast<double>(points_.size())) * 2.0);
    nx_ = std::max(1, static_cast<int>(std::ceil(ext.x / cell_ + 1e-9)));
    ny_ = std::max(1, static_cast<int>(std::ceil(ext.y / cell_ + 1e-9)));
    const auto cells = static_cast<std::size_t>(nx_) * ny_;
    std::vector<std::uint32_t> cell_of(points_.size());
    cell_start_.assign(cells + 1, 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const int ix = std::clamp(static_cast<int>((points_[i].x - box_.lo.x) / cell_), 0, nx_ - 1);
        const int iy = std::clamp(static_cast<int>((points_[i].y - box_.lo.y) / cell_), 0, ny_ - 1);
        cell_of[i] = static_cast<std::uint32_t>(iy * nx_ + ix);
        ++cell_start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
    cell_items_.resize(points_.size());
    auto fill = cell_start_;
    for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
}

std::vector<std::set<Signature>> trace_tree(const SceneSnapshot& snap, const Vec3& origin,
                                            const ReceiverSet& receivers, const EngineConfig& cfg, int threads) {
    auto dirs = launch_directions(cfg.n_rays);
    if (cfg.seed != 0) {
        const auto rot = seeded_rotation(cfg.seed);
        for (auto& d : dirs) d = normalize(rot[0] * d.x + rot[1] * d.y + rot[2] * d.z);
    }
    const double gamma = std::sqrt(4.0 * kPi / static_cast<double>(cfg.n_rays));
    const double radius_per_m = cfg.rx_sphere_scale * gamma;

    Aabb world = snap.posed.bounds;
    world.extend(origin);
    for (std::size_t i = 0; i < receivers.size(); ++i) world.extend(receivers.point(i));
    const double far = 2.0 * norm(world.extent()) + 1.0;
    const int max_order = cfg.max_order;

    const int workers = std::max(1, std::min(resolve_threads(threads), 64));
    const std::size_t chunk = std::max<std::size_t>(1, (dirs.size() + workers * 8 - 1) / (workers * 8));
    const std::size_t n_chunks = (dirs.size() + chunk - 1) / chunk;
    std::vector<std::vector<std::set<Signature>>> partial(n_chunks);

    parallel_for(n_chunks, workers, [&](std::size_t c) {
        auto& found = partial[c];
        found.resize(receivers.size());
        std::vector<std::uint64_t> stamp(receivers.size(), ~std::uint64_t{0});
        std::uint64_t segment_id = 0;
        std::vector<RayState> stack;
        const std::size_t end = std::min(dirs.size(), (c + 1) * chunk);
        for (std::size_t r = c * chunk; r < end; ++r) {
            stack.push_back({origin, dirs[r], 0.0, {}, 0, 0});
            while (!stack.empty()) {
                RayState ray = std::move(stack.back());
                stack.pop_back();
                const auto hit = snap.bvh.intersect(ray.origin, ray.dir, kVisibilityEps, far);
                const double len = hit ? hit->distance : far;
                receivers.query(
                    ray.origin, ray.dir, len, ray.l0, radius_per_m,
                    [&](std::size_t i) { found[i].insert(ray.sig); }, stamp, segment_id++);
                if (!hit || static_cast<int>(ray.sig.size()) >= max_order) continue;
                const double l1 = ray.l0 + len;
                if (ray.transmissions < cfg.max_transmissions) {
                    RayState next{hit->point, ray.dir, l1, ray.sig, ray.reflections, ray.transmissions + 1};
                    next.sig.push_back({InteractionKind::Transmission, hit->triangle_id});
                    stack.push_back(std::move(next));
                }
                if (ray.reflections < cfg.max_reflections) {
                    RayState next{hit->point, normalize(reflect_direction(ray.dir, hit->normal)), l1,
                                  std::move(ray.sig), ray.reflections + 1, ray.transmissions};
                    next.sig.push_back({InteractionKind::Reflection, hit->triangle_id});
                    stack.push_back(std::move(next));
                }
            }
        }
    });

    std::vector<std::set<Signature>> merged(receivers.size());
    for (auto& part : partial)
        for (std::size_t i = 0; i < part.size(); ++i) merged[i].merge(part[i]);
    return merged;
}

}  // namespace detail

std::vector<Signature> trace_sbr(const SceneSnapshot& snap, const Vec3& tx, const Vec3& rx, const EngineConfig& cfg) {
    validate_config(cfg);
    detail::ReceiverSet one({rx});
    auto found = detail::trace_tree(snap, tx, one, cfg, 1);
    std::set<Signature> all = std::move(found[0]);
    if (cfg.bidirectional) {
        detail::ReceiverSet back({tx});
        const auto reverse = detail::trace_tree(snap, rx, back, cfg, 1);
        for (const auto& s : reverse[0]) all.insert(detail::reversed(s));
    }
    return {all.begin(), all.end()};
}

}  // namespace chantwin
